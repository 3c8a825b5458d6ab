//! Pairs of isometric immersions: difference tensors, the linearized Gauss
//! trace, Codazzi for `W`, and the energy inner product.

use crate::darboux::{support_from, MU_DEGENERATE};
use crate::geometry::{
    catalog, second_form_derivatives, GeometryError, Immersion, PointFrame, SurfaceFile,
};
use crate::linalg::pairwise_sum;
use crate::quadrature::gauss_legendre_rule;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PairError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("charts differ: {0}")]
    ChartMismatch(String),
    #[error("mu + mu~ = {0:e} is too small")]
    SupportSum(f64),
    #[error("positivity precondition violated at {point:?}: {what}")]
    Positivity { point: Vec<f64>, what: String },
    #[error("W is not trace-free with respect to h-bar (trace {0:e})")]
    NotTraceFree(f64),
    #[error("h-bar is singular")]
    SingularHBar,
    #[error("operation needs a surface pair (n = 2)")]
    NeedsSurface,
    #[error("pair file: {0}")]
    File(String),
}

/// Two immersions of the same chart domain.
#[derive(Clone, Debug)]
pub struct IsometricPair {
    pub first: Immersion,
    pub second: Immersion,
    pub tolerance: f64,
}

impl IsometricPair {
    pub fn new(first: Immersion, second: Immersion, tolerance: f64) -> Result<Self, PairError> {
        if first.dim() != second.dim() {
            return Err(PairError::ChartMismatch("dimensions differ".into()));
        }
        let same = first
            .domain()
            .iter()
            .zip(second.domain())
            .all(|(a, b)| (a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14);
        if !same {
            return Err(PairError::ChartMismatch("domains differ".into()));
        }
        Ok(IsometricPair {
            first,
            second,
            tolerance,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SurfaceRef {
    Inline(SurfaceFile),
    /// Catalog spec such as `sphere(2)`, or a path relative to the pair file.
    Name(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairFile {
    pub first: SurfaceRef,
    pub second: SurfaceRef,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    1e-10
}

/// Resolves a surface reference: inline object, catalog spec, or file path.
pub fn resolve_surface(r: &SurfaceRef, base: Option<&Path>) -> Result<Immersion, GeometryError> {
    match r {
        SurfaceRef::Inline(f) => Immersion::from_file(f),
        SurfaceRef::Name(name) => match catalog(name) {
            Ok(im) => Ok(im),
            Err(GeometryError::UnknownCatalog(_)) => {
                let p = match base {
                    Some(b) => b.join(name),
                    None => Path::new(name).to_path_buf(),
                };
                if p.exists() {
                    Immersion::load(&p)
                } else {
                    Err(GeometryError::UnknownCatalog(name.clone()))
                }
            }
            Err(e) => Err(e),
        },
    }
}

pub fn load_pair(path: &Path) -> Result<IsometricPair, PairError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PairError::File(format!("{}: {e}", path.display())))?;
    let pf: PairFile = serde_json::from_str(&text).map_err(|e| PairError::File(e.to_string()))?;
    let base = path.parent();
    IsometricPair::new(
        resolve_surface(&pf.first, base)?,
        resolve_surface(&pf.second, base)?,
        pf.tolerance,
    )
}

/// Sup-norm of `g̃ − g` over an interior grid with `counts` points per axis.
pub fn check_isometric(pair: &IsometricPair, counts: &[usize]) -> Result<f64, PairError> {
    let mut worst: f64 = 0.0;
    for x in pair.first.interior_grid(counts) {
        let a = crate::geometry::frame_at(&pair.first, &x)?;
        let b = crate::geometry::frame_at(&pair.second, &x)?;
        for (ra, rb) in a.metric.iter().zip(&b.metric) {
            for (u, v) in ra.iter().zip(rb) {
                worst = worst.max((u - v).abs());
            }
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug)]
pub struct DifferenceTensors {
    /// `Φ = ρ̃ − ρ`.
    pub phi: f64,
    /// `Φ_{;ij}`.
    pub phi_hess: Vec<Vec<f64>>,
    /// `W = h̃ − h`.
    pub w: Vec<Vec<f64>>,
    /// `h̄ = h + h̃`.
    pub h_bar: Vec<Vec<f64>>,
    pub mu: f64,
    pub mu_tilde: f64,
    /// `det h̃ − det h`.
    pub det_gap: f64,
    pub(crate) frame: PointFrame,
}

pub fn difference_tensors(pair: &IsometricPair, x: &[f64]) -> Result<DifferenceTensors, PairError> {
    let (fa, sa) = support_from(&pair.first, x)?;
    let (fb, sb) = support_from(&pair.second, x)?;
    let n = pair.first.dim();
    let m = |f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| f(i, j)).collect()).collect()
    };
    let det = |a: &Vec<Vec<f64>>| crate::linalg::det(&crate::linalg::DenseMatrix::from_rows(a));
    Ok(DifferenceTensors {
        phi: sb.rho - sa.rho,
        phi_hess: m(&|i, j| sb.hess_rho[i][j] - sa.hess_rho[i][j]),
        w: m(&|i, j| fb.second_form[i][j] - fa.second_form[i][j]),
        h_bar: m(&|i, j| fb.second_form[i][j] + fa.second_form[i][j]),
        mu: sa.mu,
        mu_tilde: sb.mu,
        det_gap: det(&fb.second_form) - det(&fa.second_form),
        frame: fa,
    })
}

/// `max |W_ij(μ+μ̃) − 2Φ_{;ij} − h̄_ij(μ−μ̃)|`.
pub fn verify_w_formula(pair: &IsometricPair, x: &[f64]) -> Result<f64, PairError> {
    let d = difference_tensors(pair, x)?;
    let s = d.mu + d.mu_tilde;
    if s.abs() <= MU_DEGENERATE {
        return Err(PairError::SupportSum(s));
    }
    let n = d.w.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let r = d.w[i][j] * s - 2.0 * d.phi_hess[i][j] - d.h_bar[i][j] * (d.mu - d.mu_tilde);
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceCodazzi {
    /// `|h̄^{ij} W_ij|`, or the cofactor form when `h̄` is singular.
    pub trace_residual: f64,
    pub used_cofactor_form: bool,
    /// `max |W_{ij,k} − W_{ik,j}|`.
    pub codazzi_residual: f64,
}

pub fn verify_gauss_trace_and_codazzi(
    pair: &IsometricPair,
    x: &[f64],
) -> Result<TraceCodazzi, PairError> {
    let d = difference_tensors(pair, x)?;
    let n = d.w.len();
    let hb = crate::linalg::DenseMatrix::from_rows(&d.h_bar);
    let scale = d.h_bar.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let det = crate::linalg::det(&hb);
    let singular = det.abs() <= 1e-10 * scale.powi(n as i32).max(1e-300);
    let (trace_residual, used_cofactor_form) = if singular {
        if n != 2 {
            return Err(PairError::SingularHBar);
        }
        let (h, w) = (&d.h_bar, &d.w);
        (
            (h[0][0] * w[1][1] + h[1][1] * w[0][0] - 2.0 * h[0][1] * w[0][1]).abs(),
            true,
        )
    } else {
        let inv = crate::linalg::inverse(&hb).ok_or(PairError::SingularHBar)?;
        let mut t = 0.0;
        for i in 0..n {
            for j in 0..n {
                t += inv.get(i, j) * d.w[i][j];
            }
        }
        (t.abs(), false)
    };
    let da = second_form_derivatives(&pair.first, x)?;
    let db = second_form_derivatives(&pair.second, x)?;
    let mut codazzi: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let wijk = db[i][j][k] - da[i][j][k];
                let wikj = db[i][k][j] - da[i][k][j];
                codazzi = codazzi.max((wijk - wikj).abs());
            }
        }
    }
    Ok(TraceCodazzi {
        trace_residual,
        used_cofactor_form,
        codazzi_residual: codazzi,
    })
}

fn inv2(a: &[Vec<f64>]) -> Option<[[f64; 2]; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det == 0.0 {
        return None;
    }
    Some([
        [a[1][1] / det, -a[0][1] / det],
        [-a[1][0] / det, a[0][0] / det],
    ])
}

/// Pointwise integrand (per unit chart area divided by `√det g`):
/// `(det h̄ / det g) h̄^{ij} h̄^{kl} α_ik β_jl (μ+μ̃)`.
pub fn energy_density(
    h_bar: &[Vec<f64>],
    det_g: f64,
    alpha: &[Vec<f64>],
    beta: &[Vec<f64>],
    mu_sum: f64,
) -> f64 {
    let det_h = h_bar[0][0] * h_bar[1][1] - h_bar[0][1] * h_bar[1][0];
    let Some(hi) = inv2(h_bar) else {
        return 0.0;
    };
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    s += hi[i][j] * hi[k][l] * alpha[i][k] * beta[j][l];
                }
            }
        }
    }
    det_h / det_g * s * mu_sum
}

/// Tensor field evaluated at a chart point with the first immersion's frame.
pub type TensorField<'a> = &'a dyn Fn(&[f64], &PointFrame) -> Vec<Vec<f64>>;

/// Quadrature nodes for a chart: periodic directions use `counts[i]`
/// uniform samples, others `counts[i]` Gauss–Legendre cells of 16 nodes.
pub fn quadrature_nodes(im: &Immersion, counts: &[usize]) -> Vec<(Vec<f64>, f64)> {
    let (gx, gw) = gauss_legendre_rule(16);
    let axes: Vec<Vec<(f64, f64)>> = im
        .domain()
        .iter()
        .zip(im.periodic())
        .zip(counts)
        .map(|(([lo, hi], p), &n)| {
            if *p {
                let h = (hi - lo) / n as f64;
                (0..n).map(|k| (lo + h * k as f64, h)).collect()
            } else {
                let h = (hi - lo) / n as f64;
                let mut v = Vec::with_capacity(16 * n);
                for c in 0..n {
                    let a = lo + h * c as f64;
                    for (x, w) in gx.iter().zip(&gw) {
                        v.push((a + 0.5 * h * (x + 1.0), 0.5 * h * w));
                    }
                }
                v
            }
        })
        .collect();
    let mut out = vec![(vec![], 1.0)];
    for axis in &axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for (p, w) in &out {
            for (x, wx) in axis {
                let mut q = p.clone();
                q.push(*x);
                next.push((q, w * wx));
            }
        }
        out = next;
    }
    out
}

/// `∫ (det h̄/det g) h̄^{ij}h̄^{kl} α_ik β_jl (μ+μ̃) dV_g`.
pub fn energy_inner_product(
    pair: &IsometricPair,
    alpha: TensorField<'_>,
    beta: TensorField<'_>,
    counts: &[usize],
) -> Result<f64, PairError> {
    if pair.first.dim() != 2 {
        return Err(PairError::NeedsSurface);
    }
    let mut terms = Vec::new();
    for (x, w) in quadrature_nodes(&pair.first, counts) {
        let d = difference_tensors(pair, &x)?;
        let det_h = d.h_bar[0][0] * d.h_bar[1][1] - d.h_bar[0][1] * d.h_bar[1][0];
        let mu_sum = d.mu + d.mu_tilde;
        if !(det_h > 0.0) {
            return Err(PairError::Positivity {
                point: x,
                what: format!("det h-bar = {det_h:e}"),
            });
        }
        if !(mu_sum > 0.0) {
            return Err(PairError::Positivity {
                point: x,
                what: format!("mu + mu~ = {mu_sum:e}"),
            });
        }
        let a = alpha(&x, &d.frame);
        let b = beta(&x, &d.frame);
        let dens = energy_density(&d.h_bar, d.frame.det_g, &a, &b, mu_sum);
        terms.push(w * dens * d.frame.det_g.sqrt());
    }
    Ok(pairwise_sum(&terms))
}

/// Checks `det(h̄)·h̄^{ij}h̄^{kl}W_jl` against `(−W22, W21)` for `i = 1` and
/// `(W12, −W11)` for `i = 2`; returns the max deviation.
pub fn cofactor_divergence_identity(h_bar: &[Vec<f64>], w: &[Vec<f64>]) -> Result<f64, PairError> {
    let det = h_bar[0][0] * h_bar[1][1] - h_bar[0][1] * h_bar[1][0];
    let hi = inv2(h_bar).ok_or(PairError::SingularHBar)?;
    if det == 0.0 {
        return Err(PairError::SingularHBar);
    }
    let mut tr = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            tr += hi[i][j] * w[i][j];
        }
    }
    let scale = w.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
        * hi.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if tr.abs() > 1e-10 * scale.max(1e-300) && tr.abs() > 1e-14 {
        return Err(PairError::NotTraceFree(tr));
    }
    let expected = [[-w[1][1], w[1][0]], [w[0][1], -w[0][0]]];
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for k in 0..2 {
            let mut v = 0.0;
            for j in 0..2 {
                for l in 0..2 {
                    v += hi[i][j] * hi[k][l] * w[j][l];
                }
            }
            worst = worst.max((det * v - expected[i][k]).abs());
        }
    }
    Ok(worst)
}
