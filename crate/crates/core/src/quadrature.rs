//! Quadrature rules and fixed-step integrators.

use crate::linalg::pairwise_sum;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("no samples")]
    Empty,
    #[error("invalid rule: {0}")]
    Invalid(String),
}

/// Integral over one period of a function given by `samples` uniformly
/// spaced over `[0, period)` (no duplicated endpoint).
pub fn periodic_trapezoid(samples: &[f64], period: f64) -> Result<f64, QuadratureError> {
    if samples.is_empty() {
        return Err(QuadratureError::Empty);
    }
    Ok(pairwise_sum(samples) * period / samples.len() as f64)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre quadrature with `cells` equal cells of `nodes`
/// points each.
pub fn gauss_legendre(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    cells: usize,
    nodes: usize,
) -> Result<f64, QuadratureError> {
    if cells == 0 || nodes == 0 {
        return Err(QuadratureError::Invalid("cells and nodes must be positive".into()));
    }
    let (x, w) = gauss_legendre_rule(nodes);
    let h = (b - a) / cells as f64;
    let mut terms = Vec::with_capacity(cells * nodes);
    for c in 0..cells {
        let lo = a + c as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            terms.push(wi * f(lo + 0.5 * h * (xi + 1.0)));
        }
    }
    Ok(0.5 * h * pairwise_sum(&terms))
}

/// Classical fourth-order Runge–Kutta with a fixed step; returns the state at
/// every step (including the initial state).
pub fn rk4(
    f: impl Fn(f64, &[f64]) -> Vec<f64>,
    t0: f64,
    y0: &[f64],
    h: f64,
    steps: usize,
) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = y0.to_vec();
    out.push(y.clone());
    let axpy = |y: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        y.iter().zip(k).map(|(a, b)| a + s * b).collect()
    };
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * h, &axpy(&y, &k1, 0.5 * h));
        let k3 = f(t + 0.5 * h, &axpy(&y, &k2, 0.5 * h));
        let k4 = f(t + h, &axpy(&y, &k3, h));
        for j in 0..y.len() {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        out.push(y.clone());
    }
    out
}
