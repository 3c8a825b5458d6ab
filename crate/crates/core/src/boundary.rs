//! Boundary machinery for convex surfaces with planar boundary curves: the
//! closing conditions, the boundary ODE, the reference curve, the `U`/`V`
//! functions and the boundary energy inequality.

use crate::expr::{parse_expression, Expr};
use crate::geometry::{geodesic_boundary_chart, BoundaryEdge, GeodesicChart, GeometryError, Immersion};
use crate::linalg::{null_space, DenseMatrix, LinalgError};
use crate::quadrature::{gauss_legendre_rule, periodic_trapezoid, rk4};
use rand::Rng;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;
use std::f64::consts::{PI, TAU};
use std::io::Read;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundaryError {
    #[error("k_g must be positive, found {value:e} at {at}")]
    NonPositive { value: f64, at: f64 },
    #[error("total turning {0} differs from 2*pi; no angle parametrization")]
    Turning(f64),
    #[error("f is not admissible: {constraint} = {value:e}")]
    Inadmissible { constraint: &'static str, value: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("profile: {0}")]
    Profile(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Trigonometric interpolant of uniform periodic samples.
#[derive(Clone, Debug)]
pub struct TrigSeries {
    period: f64,
    mean: f64,
    /// `(m, c_m)` for `1 ≤ m < N/2`; the real part of
    /// `2 c_m e^{imωx}` is the mode's contribution.
    modes: Vec<(f64, Complex<f64>)>,
    /// Cosine amplitude of the Nyquist mode for even `N`.
    nyquist: Option<(f64, f64)>,
}

impl TrigSeries {
    pub fn new(samples: &[f64], period: f64) -> TrigSeries {
        let n = samples.len();
        let mut buf: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let scale = 1.0 / n as f64;
        let mean = buf[0].re * scale;
        let mut modes = Vec::new();
        for m in 1..n.div_ceil(2) {
            modes.push((m as f64, buf[m] * scale));
        }
        let nyquist = (n % 2 == 0 && n > 0).then(|| ((n / 2) as f64, buf[n / 2].re * scale));
        TrigSeries {
            period,
            mean,
            modes,
            nyquist,
        }
    }

    fn omega(&self) -> f64 {
        TAU / self.period
    }

    pub fn eval(&self, x: f64) -> f64 {
        let w = self.omega();
        let mut v = self.mean;
        for &(m, c) in &self.modes {
            let e = Complex::from_polar(1.0, m * w * x);
            v += 2.0 * (c * e).re;
        }
        if let Some((m, a)) = self.nyquist {
            v += a * (m * w * x).cos();
        }
        v
    }

    /// `∫_0^x` of the interpolant.
    pub fn integral(&self, x: f64) -> f64 {
        let w = self.omega();
        let mut v = self.mean * x;
        for &(m, c) in &self.modes {
            let e = Complex::from_polar(1.0, m * w * x) - Complex::new(1.0, 0.0);
            v += 2.0 * (c * e / Complex::new(0.0, m * w)).re;
        }
        if let Some((m, a)) = self.nyquist {
            v += a * (m * w * x).sin() / (m * w);
        }
        v
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }
}

#[derive(Clone, Debug)]
enum ThetaKg {
    Expr(Expr),
    Series(TrigSeries),
}

/// How the profile was given.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    ThetaExpression,
    ThetaSamples,
    ArcExpression,
    ArcSamples,
}

/// Geodesic curvature of a closed boundary curve.
#[derive(Clone, Debug)]
pub struct BoundaryProfile {
    pub kind: ProfileKind,
    /// Curve length.
    pub length: f64,
    /// `∮ k_g ds`.
    pub turning: f64,
    /// `|∮ e^{iθ(s)} ds|`.
    pub closure: f64,
    pub min_kg: f64,
    kg: Option<ThetaKg>,
}

const CHECK_SAMPLES: usize = 4096;
const ARC_TO_THETA: usize = 512;

impl BoundaryProfile {
    /// `k_g` as an expression in `θ` (variable `x1`).
    pub fn from_theta_expression(text: &str) -> Result<Self, BoundaryError> {
        let e = parse_expression(text, 1).map_err(|e| BoundaryError::Profile(e.to_string()))?;
        let samples: Vec<f64> = (0..CHECK_SAMPLES)
            .map(|j| e.eval(&[TAU * j as f64 / CHECK_SAMPLES as f64]))
            .collect();
        let mut p = Self::theta_common(&samples, ProfileKind::ThetaExpression)?;
        p.kg = Some(ThetaKg::Expr(e));
        p.finish_theta()
    }

    /// Uniform samples of `k_g` over `θ ∈ [0, 2π)`.
    pub fn from_theta_samples(samples: &[f64]) -> Result<Self, BoundaryError> {
        if samples.len() < 3 {
            return Err(BoundaryError::Profile("need at least 3 samples".into()));
        }
        let mut p = Self::theta_common(samples, ProfileKind::ThetaSamples)?;
        p.kg = Some(ThetaKg::Series(TrigSeries::new(samples, TAU)));
        p.finish_theta()
    }

    fn theta_common(samples: &[f64], kind: ProfileKind) -> Result<Self, BoundaryError> {
        let (min_kg, at) = min_with_arg(samples);
        if !(min_kg > 0.0) {
            return Err(BoundaryError::NonPositive {
                value: min_kg,
                at: TAU * at as f64 / samples.len() as f64,
            });
        }
        Ok(BoundaryProfile {
            kind,
            length: 0.0,
            turning: TAU,
            closure: 0.0,
            min_kg,
            kg: None,
        })
    }

    fn finish_theta(mut self) -> Result<Self, BoundaryError> {
        let inv: Vec<f64> = (0..CHECK_SAMPLES)
            .map(|j| 1.0 / self.kg(TAU * j as f64 / CHECK_SAMPLES as f64))
            .collect();
        self.length = periodic_trapezoid(&inv, TAU).expect("non-empty");
        let c: Vec<f64> = (0..CHECK_SAMPLES)
            .map(|j| {
                let th = TAU * j as f64 / CHECK_SAMPLES as f64;
                th.cos() * inv[j]
            })
            .collect();
        let s: Vec<f64> = (0..CHECK_SAMPLES)
            .map(|j| {
                let th = TAU * j as f64 / CHECK_SAMPLES as f64;
                th.sin() * inv[j]
            })
            .collect();
        let cx = periodic_trapezoid(&c, TAU).expect("non-empty");
        let cy = periodic_trapezoid(&s, TAU).expect("non-empty");
        self.closure = cx.hypot(cy);
        Ok(self)
    }

    /// `k_g` as an expression in arc length `s` (variable `x1`) on `[0, L)`.
    pub fn from_arc_expression(text: &str, length: f64) -> Result<Self, BoundaryError> {
        let e = parse_expression(text, 1).map_err(|e| BoundaryError::Profile(e.to_string()))?;
        let samples: Vec<f64> = (0..CHECK_SAMPLES)
            .map(|j| e.eval(&[length * j as f64 / CHECK_SAMPLES as f64]))
            .collect();
        let mut p = Self::from_arc_samples(&samples, length)?;
        p.kind = ProfileKind::ArcExpression;
        Ok(p)
    }

    /// Uniform samples of `k_g` over `s ∈ [0, L)`.
    pub fn from_arc_samples(samples: &[f64], length: f64) -> Result<Self, BoundaryError> {
        if samples.len() < 3 || !(length > 0.0) {
            return Err(BoundaryError::Profile(
                "need at least 3 samples and a positive length".into(),
            ));
        }
        let (min_kg, at) = min_with_arg(samples);
        if !(min_kg > 0.0) {
            return Err(BoundaryError::NonPositive {
                value: min_kg,
                at: length * at as f64 / samples.len() as f64,
            });
        }
        let series = TrigSeries::new(samples, length);
        let turning = series.mean() * length;
        let n = samples.len().max(CHECK_SAMPLES);
        let (mut cx, mut cy) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for j in 0..n {
            let th = series.integral(length * j as f64 / n as f64);
            cx.push(th.cos());
            cy.push(th.sin());
        }
        let closure = periodic_trapezoid(&cx, length)
            .expect("non-empty")
            .hypot(periodic_trapezoid(&cy, length).expect("non-empty"));
        let kg = if (turning - TAU).abs() <= 1e-8 * TAU {
            // Resample in θ by inverting θ(s) with Newton's method.
            let mut out = Vec::with_capacity(ARC_TO_THETA);
            let mut s = 0.0;
            for j in 0..ARC_TO_THETA {
                let th = TAU * j as f64 / ARC_TO_THETA as f64;
                for _ in 0..50 {
                    let step = (series.integral(s) - th) / series.eval(s);
                    s = (s - step).clamp(0.0, length);
                    if step.abs() <= 1e-15 * length {
                        break;
                    }
                }
                out.push(series.eval(s));
            }
            Some(ThetaKg::Series(TrigSeries::new(&out, TAU)))
        } else {
            None
        };
        Ok(BoundaryProfile {
            kind: ProfileKind::ArcSamples,
            length,
            turning,
            closure,
            min_kg,
            kg,
        })
    }

    /// CSV with header `theta,kg` (uniform on `[0, 2π)`) or `s,kg`
    /// (uniform on `[0, L)`, `L` = sample count times spacing).
    pub fn from_csv(reader: impl Read) -> Result<Self, BoundaryError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| BoundaryError::Profile(e.to_string()))?
            .clone();
        let cols: Vec<&str> = headers.iter().collect();
        let is_theta = match cols.as_slice() {
            ["theta", "kg"] => true,
            ["s", "kg"] => false,
            _ => {
                return Err(BoundaryError::Profile(format!(
                    "header must be `theta,kg` or `s,kg`, got `{}`",
                    cols.join(",")
                )))
            }
        };
        let mut xs = Vec::new();
        let mut ks = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| BoundaryError::Profile(e.to_string()))?;
            let parse = |i: usize| -> Result<f64, BoundaryError> {
                rec.get(i)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| BoundaryError::Profile(format!("bad record {:?}", rec)))
            };
            xs.push(parse(0)?);
            ks.push(parse(1)?);
        }
        if xs.len() < 3 {
            return Err(BoundaryError::Profile("need at least 3 samples".into()));
        }
        let h = xs[1] - xs[0];
        let uniform = xs
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1e-300))
            && xs[0].abs() <= 1e-12
            && h > 0.0;
        if !uniform {
            return Err(BoundaryError::Profile(
                "samples must start at 0 and be uniformly spaced".into(),
            ));
        }
        if is_theta {
            if (h * xs.len() as f64 - TAU).abs() > 1e-9 {
                return Err(BoundaryError::Profile(
                    "theta samples must cover [0, 2*pi) without the endpoint".into(),
                ));
            }
            Self::from_theta_samples(&ks)
        } else {
            Self::from_arc_samples(&ks, h * xs.len() as f64)
        }
    }

    pub fn has_angle_parametrization(&self) -> bool {
        self.kg.is_some()
    }

    /// `k_g` at angle `θ`.
    pub fn kg(&self, theta: f64) -> f64 {
        match &self.kg {
            Some(ThetaKg::Expr(e)) => e.eval(&[theta]),
            Some(ThetaKg::Series(s)) => s.eval(theta),
            None => f64::NAN,
        }
    }

    fn require_angle(&self) -> Result<(), BoundaryError> {
        if self.kg.is_none() {
            return Err(BoundaryError::Turning(self.turning));
        }
        Ok(())
    }
}

fn min_with_arg(v: &[f64]) -> (f64, usize) {
    v.iter()
        .enumerate()
        .fold((f64::INFINITY, 0), |(m, a), (i, &x)| if x < m || x.is_nan() { (x, i) } else { (m, a) })
}

#[derive(Clone, Debug, Serialize)]
pub struct DongReport {
    pub turning: f64,
    /// `|∮ k_g ds − 2π|`.
    pub turning_residual: f64,
    /// `|∮ e^{iθ(s)} ds|`.
    pub closure_residual: f64,
    pub min_kg: f64,
    /// `min K_t k_g` over the boundary, when a surface is given.
    pub min_kt_kg: Option<f64>,
    pub turning_ok: bool,
    pub closure_ok: bool,
    pub positivity_ok: bool,
}

const DONG_TOL: f64 = 1e-6;

pub fn dong_conditions(profile: &BoundaryProfile) -> DongReport {
    let turning_residual = (profile.turning - TAU).abs();
    DongReport {
        turning: profile.turning,
        turning_residual,
        closure_residual: profile.closure,
        min_kg: profile.min_kg,
        min_kt_kg: None,
        turning_ok: turning_residual <= DONG_TOL,
        closure_ok: profile.closure <= DONG_TOL,
        positivity_ok: profile.min_kg > 0.0,
    }
}

/// One-sided derivative in `t` at `t = 0`, fourth order when enough steps exist.
fn dt0(v: &[f64], h: f64) -> f64 {
    if v.len() >= 5 {
        (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * h)
    } else {
        (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    }
}

/// The closing conditions evaluated on a geodesic boundary chart, including
/// the sign of `K_t k_g`.
pub fn dong_conditions_on_chart(chart: &GeodesicChart) -> Result<DongReport, BoundaryError> {
    let n = chart.n_s();
    if chart.t.len() < 3 {
        return Err(BoundaryError::Precondition("chart needs at least 2 t-steps".into()));
    }
    let h = chart.t[1] - chart.t[0];
    let period = chart.sigma[1] - chart.sigma[0];
    let period = period * n as f64;
    let weights: Vec<f64> = (0..n).map(|j| chart.kg[j] * chart.speed[j]).collect();
    let turning = periodic_trapezoid(&weights, period).expect("non-empty");
    let series = TrigSeries::new(&weights, period);
    let mut cx = Vec::with_capacity(n);
    let mut cy = Vec::with_capacity(n);
    for j in 0..n {
        let th = series.integral(chart.sigma[j] - chart.sigma[0]);
        cx.push(th.cos() * chart.speed[j]);
        cy.push(th.sin() * chart.speed[j]);
    }
    let closure = periodic_trapezoid(&cx, period)
        .expect("non-empty")
        .hypot(periodic_trapezoid(&cy, period).expect("non-empty"));
    let min_kg = chart.kg.iter().copied().fold(f64::INFINITY, f64::min);
    let min_kt_kg = (0..n)
        .map(|j| dt0(&chart.curvature[j], h) * chart.kg[j])
        .fold(f64::INFINITY, f64::min);
    let turning_residual = (turning - TAU).abs();
    Ok(DongReport {
        turning,
        turning_residual,
        closure_residual: closure,
        min_kg,
        min_kt_kg: Some(min_kt_kg),
        turning_ok: turning_residual <= DONG_TOL,
        closure_ok: closure <= DONG_TOL,
        positivity_ok: min_kt_kg > 0.0,
    })
}

const CELLS: usize = 256;
const NODES: usize = 12;

/// Cumulative integrals `u, v, x1, x2` of
/// `f sinθ, f cosθ, cosθ/k_g, sinθ/k_g` from 0.
struct Cumulative<'a> {
    profile: &'a BoundaryProfile,
    f: &'a dyn Fn(f64) -> f64,
    h: f64,
    left: Vec<[f64; 4]>,
    rule: (Vec<f64>, Vec<f64>),
}

impl<'a> Cumulative<'a> {
    fn new(profile: &'a BoundaryProfile, f: &'a dyn Fn(f64) -> f64) -> Self {
        let h = TAU / CELLS as f64;
        let mut c = Cumulative {
            profile,
            f,
            h,
            left: vec![[0.0; 4]],
            rule: gauss_legendre_rule(NODES),
        };
        for j in 0..CELLS {
            let a = h * j as f64;
            let inc = c.segment(a, a + h);
            let prev = c.left[j];
            c.left.push(std::array::from_fn(|k| prev[k] + inc[k]));
        }
        c
    }

    fn integrand(&self, th: f64) -> [f64; 4] {
        let f = (self.f)(th);
        let k = self.profile.kg(th);
        let (s, c) = th.sin_cos();
        [f * s, f * c, c / k, s / k]
    }

    fn segment(&self, a: f64, b: f64) -> [f64; 4] {
        let (x, w) = &self.rule;
        let mut acc = [0.0; 4];
        for (xi, wi) in x.iter().zip(w) {
            let v = self.integrand(a + 0.5 * (b - a) * (xi + 1.0));
            for k in 0..4 {
                acc[k] += 0.5 * (b - a) * wi * v[k];
            }
        }
        acc
    }

    fn at(&self, th: f64) -> [f64; 4] {
        let cell = ((th / self.h).floor().max(0.0) as usize).min(CELLS - 1);
        let a = self.h * cell as f64;
        let inc = self.segment(a, th);
        std::array::from_fn(|k| self.left[cell][k] + inc[k])
    }

    fn end(&self) -> [f64; 4] {
        self.left[CELLS]
    }

    /// `∫_0^{2π} g(θ, [u, v, x1, x2]) dθ` by Gauss–Legendre over the cells.
    fn integrate(&self, g: impl Fn(f64, [f64; 4]) -> f64) -> f64 {
        let (x, w) = &self.rule;
        let mut terms = Vec::with_capacity(CELLS * NODES);
        for j in 0..CELLS {
            let a = self.h * j as f64;
            for (xi, wi) in x.iter().zip(w) {
                let th = a + 0.5 * self.h * (xi + 1.0);
                terms.push(0.5 * self.h * wi * g(th, self.at(th)));
            }
        }
        crate::linalg::pairwise_sum(&terms)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryOdeSolution {
    pub theta: Vec<f64>,
    pub phi_s: Vec<f64>,
    pub phi_t: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    /// Max deviation of the time-stepped solution from the closed form.
    pub closed_form_deviation: f64,
}

/// RK4 for `φ_s' = φ_t`, `φ_t' = −φ_s + f` in `θ`, compared with
/// `φ_s = −cosθ (u − c1) + sinθ (v + c2)`.
pub fn solve_boundary_ode(
    profile: &BoundaryProfile,
    f: &dyn Fn(f64) -> f64,
    c1: f64,
    c2: f64,
    n_steps: usize,
) -> Result<BoundaryOdeSolution, BoundaryError> {
    profile.require_angle()?;
    if n_steps == 0 {
        return Err(BoundaryError::Profile("n_steps must be positive".into()));
    }
    let h = TAU / n_steps as f64;
    let ys = rk4(|th, y| vec![y[1], -y[0] + f(th)], 0.0, &[c1, c2], h, n_steps);
    let cum = Cumulative::new(profile, f);
    let mut sol = BoundaryOdeSolution {
        theta: Vec::with_capacity(n_steps + 1),
        phi_s: Vec::with_capacity(n_steps + 1),
        phi_t: Vec::with_capacity(n_steps + 1),
        u: Vec::with_capacity(n_steps + 1),
        v: Vec::with_capacity(n_steps + 1),
        c1,
        c2,
        closed_form_deviation: 0.0,
    };
    for (k, y) in ys.iter().enumerate() {
        let th = h * k as f64;
        let [u, v, _, _] = cum.at(th);
        let (s, c) = th.sin_cos();
        let ps = -c * (u - c1) + s * (v + c2);
        let pt = s * (u - c1) + c * (v + c2);
        sol.closed_form_deviation = sol
            .closed_form_deviation
            .max((y[0] - ps).abs())
            .max((y[1] - pt).abs());
        sol.theta.push(th);
        sol.phi_s.push(y[0]);
        sol.phi_t.push(y[1]);
        sol.u.push(u);
        sol.v.push(v);
    }
    Ok(sol)
}

#[derive(Clone, Debug, Serialize)]
pub struct ReferenceCurve {
    pub theta: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    /// `S = −∮ x2 dx1`.
    pub area: f64,
    /// `|(x1, x2)(2π)|`.
    pub closure_gap: f64,
    /// Max deviation of the numerically differentiated curvature from `k_g`.
    pub curvature_residual: f64,
}

/// `x1 = ∫ cos/k_g`, `x2 = ∫ sin/k_g`, sampled at `samples` angles.
pub fn reference_curve(profile: &BoundaryProfile, samples: usize) -> Result<ReferenceCurve, BoundaryError> {
    profile.require_angle()?;
    let zero = |_: f64| 0.0;
    let cum = Cumulative::new(profile, &zero);
    let area = -cum.integrate(|th, c| c[3] * th.cos() / profile.kg(th));
    let end = cum.end();
    let mut out = ReferenceCurve {
        theta: Vec::with_capacity(samples + 1),
        x1: Vec::with_capacity(samples + 1),
        x2: Vec::with_capacity(samples + 1),
        area,
        closure_gap: end[2].hypot(end[3]),
        curvature_residual: 0.0,
    };
    let d = 1e-4;
    for j in 0..=samples {
        let th = TAU * j as f64 / samples.max(1) as f64;
        let c = cum.at(th);
        out.theta.push(th);
        out.x1.push(c[2]);
        out.x2.push(c[3]);
        // Tangent (cos/k, sin/k) and its central difference.
        let tan = |t: f64| {
            let k = profile.kg(t);
            (t.cos() / k, t.sin() / k)
        };
        let (a1, a2) = tan(th);
        let (p1, p2) = tan(th + d);
        let (m1, m2) = tan(th - d);
        let (b1, b2) = ((p1 - m1) / (2.0 * d), (p2 - m2) / (2.0 * d));
        let curv = (a1 * b2 - a2 * b1) / (a1 * a1 + a2 * a2).powf(1.5);
        out.curvature_residual = out.curvature_residual.max((curv - profile.kg(th)).abs());
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct Admissibility {
    pub u_end: f64,
    pub v_end: f64,
    /// `∫(−cosθ u + sinθ v)/k_g dθ`.
    pub mean_phi_s: f64,
}

impl Admissibility {
    fn check(&self, scale: f64) -> Result<(), BoundaryError> {
        let tol = 1e-8 * scale.max(1.0);
        for (constraint, value) in [
            ("u(2pi)", self.u_end),
            ("v(2pi)", self.v_end),
            ("integral of phi_s ds", self.mean_phi_s),
        ] {
            if value.abs() > tol {
                return Err(BoundaryError::Inadmissible { constraint, value });
            }
        }
        Ok(())
    }
}

fn admissibility_of(cum: &Cumulative<'_>) -> Admissibility {
    let end = cum.end();
    let p = cum.profile;
    Admissibility {
        u_end: end[0],
        v_end: end[1],
        mean_phi_s: cum.integrate(|th, c| (-th.cos() * c[0] + th.sin() * c[1]) / p.kg(th)),
    }
}

fn sup_norm(f: &dyn Fn(f64) -> f64) -> f64 {
    (0..1024)
        .map(|j| f(TAU * j as f64 / 1024.0).abs())
        .fold(0.0, f64::max)
}

pub fn admissibility(profile: &BoundaryProfile, f: &dyn Fn(f64) -> f64) -> Result<Admissibility, BoundaryError> {
    profile.require_angle()?;
    Ok(admissibility_of(&Cumulative::new(profile, f)))
}

#[derive(Clone, Debug, Serialize)]
pub struct UvData {
    pub c: f64,
    pub theta: Vec<f64>,
    pub u_big: Vec<f64>,
    pub v_big: Vec<f64>,
    /// `|U(0)| + |U(π)|`.
    pub endpoint_residual: f64,
    /// `max |U' cotθ − V'|` away from `0, π, 2π`.
    pub cot_residual: f64,
}

/// `U = u + C x2`, `V = v + C x1` with `C = −u(π)/x2(π)`.
pub fn uv_functions(
    profile: &BoundaryProfile,
    f: &dyn Fn(f64) -> f64,
    samples: usize,
) -> Result<UvData, BoundaryError> {
    profile.require_angle()?;
    let cum = Cumulative::new(profile, f);
    admissibility_of(&cum).check(sup_norm(f))?;
    Ok(uv_from(&cum, f, samples))
}

fn uv_from(cum: &Cumulative<'_>, f: &dyn Fn(f64) -> f64, samples: usize) -> UvData {
    let p = cum.profile;
    let at_pi = cum.at(PI);
    let c = -at_pi[0] / at_pi[3];
    let mut out = UvData {
        c,
        theta: Vec::new(),
        u_big: Vec::new(),
        v_big: Vec::new(),
        endpoint_residual: 0.0,
        cot_residual: 0.0,
    };
    let u0 = cum.at(0.0);
    out.endpoint_residual = (u0[0] + c * u0[3]).abs() + (at_pi[0] + c * at_pi[3]).abs();
    for j in 0..=samples {
        let th = TAU * j as f64 / samples.max(1) as f64;
        let v = cum.at(th);
        out.theta.push(th);
        out.u_big.push(v[0] + c * v[3]);
        out.v_big.push(v[1] + c * v[2]);
        let excluded = [0.0, PI, TAU].iter().any(|e| (th - e).abs() < 1e-3);
        if !excluded {
            let k = p.kg(th);
            let fv = f(th);
            let (s, co) = th.sin_cos();
            let du = s * (fv + c / k);
            let dv = co * (fv + c / k);
            out.cot_residual = out.cot_residual.max((du * co / s - dv).abs());
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyInequality {
    /// `2∫ −v' u dθ`.
    pub direct: f64,
    /// `−∫ U²/sin²θ dθ − 2C²S`.
    pub via_uv: f64,
    pub c: f64,
    pub area: f64,
    pub admissibility: Admissibility,
}

impl EnergyInequality {
    pub fn value(&self) -> f64 {
        self.direct
    }

    pub fn agreement(&self) -> f64 {
        (self.direct - self.via_uv).abs()
    }
}

/// `∮ φ_s F ds` for admissible `f`, by two independent routes.
pub fn boundary_energy_inequality(
    profile: &BoundaryProfile,
    f: &dyn Fn(f64) -> f64,
) -> Result<EnergyInequality, BoundaryError> {
    profile.require_angle()?;
    let cum = Cumulative::new(profile, f);
    let adm = admissibility_of(&cum);
    adm.check(sup_norm(f))?;
    let direct = 2.0 * cum.integrate(|th, c| -f(th) * th.cos() * c[0]);
    let at_pi = cum.at(PI);
    let c = -at_pi[0] / at_pi[3];
    let area = -cum.integrate(|th, v| v[3] * th.cos() / profile.kg(th));
    let quad = cum.integrate(|th, v| {
        let u = v[0] + c * v[3];
        let r = u / th.sin();
        r * r
    });
    Ok(EnergyInequality {
        direct,
        via_uv: -quad - 2.0 * c * c * area,
        c,
        area,
        admissibility: adm,
    })
}

/// `a0 + Σ_{k=1}^{K} (a_k cos kθ + b_k sin kθ)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrigPoly {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl TrigPoly {
    pub fn degree(&self) -> usize {
        self.b.len()
    }

    pub fn eval(&self, th: f64) -> f64 {
        let mut v = self.a[0];
        for k in 1..self.a.len() {
            let (s, c) = (k as f64 * th).sin_cos();
            v += self.a[k] * c + self.b[k - 1] * s;
        }
        v
    }

    /// `[a0, a1..aK, b1..bK]`.
    pub fn coefficients(&self) -> Vec<f64> {
        self.a.iter().chain(&self.b).copied().collect()
    }

    pub fn from_coefficients(c: &[f64]) -> TrigPoly {
        let k = (c.len() - 1) / 2;
        TrigPoly {
            a: c[..=k].to_vec(),
            b: c[k + 1..].to_vec(),
        }
    }
}

/// Orthogonal projection of trig-polynomial coefficients onto the subspace
/// satisfying `u(2π) = v(2π) = 0` and `∮ φ_s ds = 0`.
#[derive(Clone, Debug)]
pub struct AdmissibleProjector {
    pub degree: usize,
    basis: DenseMatrix,
    pub constraints: DenseMatrix,
}

impl AdmissibleProjector {
    pub fn new(profile: &BoundaryProfile, degree: usize) -> Result<Self, BoundaryError> {
        profile.require_angle()?;
        let p = 2 * degree + 1;
        let mut cons = DenseMatrix::zeros(3, p);
        for col in 0..p {
            let mut e = vec![0.0; p];
            e[col] = 1.0;
            let t = TrigPoly::from_coefficients(&e);
            let f = move |th: f64| t.eval(th);
            let a = admissibility_of(&Cumulative::new(profile, &f));
            cons.set(0, col, a.u_end);
            cons.set(1, col, a.v_end);
            cons.set(2, col, a.mean_phi_s);
        }
        let basis = null_space(&cons, 1e-12)?;
        Ok(AdmissibleProjector {
            degree,
            basis,
            constraints: cons,
        })
    }

    pub fn project(&self, coeffs: &[f64]) -> Vec<f64> {
        let q = &self.basis;
        let proj: Vec<f64> = (0..q.cols())
            .map(|j| (0..q.rows()).map(|i| q.get(i, j) * coeffs[i]).sum())
            .collect();
        (0..q.rows())
            .map(|i| (0..q.cols()).map(|j| q.get(i, j) * proj[j]).sum())
            .collect()
    }

    /// Uniform coefficients in `[-1, 1]`, projected.
    pub fn random(&self, rng: &mut impl Rng) -> TrigPoly {
        let c: Vec<f64> = (0..2 * self.degree + 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        TrigPoly::from_coefficients(&self.project(&c))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaHhReport {
    pub samples: usize,
    pub max_abs_k: f64,
    pub min_abs_kt: f64,
    pub max_abs_l: f64,
    pub max_abs_m: f64,
    /// `max |N − √(K_t/B_t)|`.
    pub n_residual: f64,
    /// `max |L_t − √(K_t B_t)|`.
    pub lt_residual: f64,
    pub pass: bool,
}

/// Boundary values of the second fundamental form in geodesic coordinates
/// along an edge where `K = 0` and `K_t ≠ 0`.
pub fn lemma_hh_check(
    im: &Immersion,
    edge: BoundaryEdge,
    depth: f64,
    n_s: usize,
    n_t: usize,
) -> Result<LemmaHhReport, BoundaryError> {
    let chart = geodesic_boundary_chart(im, edge, depth, n_s, n_t)?;
    let h = chart.t[1] - chart.t[0];
    let mut rep = LemmaHhReport {
        samples: n_s,
        max_abs_k: 0.0,
        min_abs_kt: f64::INFINITY,
        max_abs_l: 0.0,
        max_abs_m: 0.0,
        n_residual: 0.0,
        lt_residual: 0.0,
        pass: false,
    };
    let mut kts = Vec::with_capacity(n_s);
    for j in 0..n_s {
        let k = &chart.curvature[j];
        let kt = dt0(k, h);
        rep.max_abs_k = rep.max_abs_k.max(k[0].abs());
        rep.min_abs_kt = rep.min_abs_kt.min(kt.abs());
        kts.push(kt);
    }
    let curvature_scale = chart
        .curvature
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    if rep.max_abs_k > 1e-6 * curvature_scale.max(1.0) {
        return Err(BoundaryError::Precondition(format!(
            "K is not zero on the boundary (max |K| = {:e})",
            rep.max_abs_k
        )));
    }
    if rep.min_abs_kt <= 1e-6 {
        return Err(BoundaryError::Precondition(format!(
            "K_t vanishes on the boundary (min |K_t| = {:e})",
            rep.min_abs_kt
        )));
    }
    for j in 0..n_s {
        let bt = chart.b_t[j][0];
        let kt = kts[j];
        let lt = dt0(&chart.l[j], h);
        rep.max_abs_l = rep.max_abs_l.max(chart.l[j][0].abs());
        rep.max_abs_m = rep.max_abs_m.max(chart.m[j][0].abs());
        let ratio = kt / bt;
        let prod = kt * bt;
        if ratio < 0.0 || prod < 0.0 {
            return Err(BoundaryError::Precondition(format!(
                "K_t and B_t have opposite signs at sample {j}"
            )));
        }
        rep.n_residual = rep.n_residual.max((chart.n[j][0] - ratio.sqrt()).abs());
        rep.lt_residual = rep.lt_residual.max((lt - prod.sqrt()).abs());
    }
    rep.pass = rep.max_abs_l < 1e-6
        && rep.max_abs_m < 1e-6
        && rep.n_residual < 1e-4
        && rep.lt_residual < 1e-4;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{catalog, EdgeSide, Orientation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit() -> BoundaryProfile {
        BoundaryProfile::from_theta_expression("1").unwrap()
    }

    #[test]
    fn trig_series_integrates_spectrally() {
        let n = 64;
        let samples: Vec<f64> = (0..n)
            .map(|j| {
                let x = TAU * j as f64 / n as f64;
                1.0 + 0.3 * (2.0 * x).cos() + 0.1 * x.sin()
            })
            .collect();
        let s = TrigSeries::new(&samples, TAU);
        let x: f64 = 1.234;
        assert!((s.eval(x) - (1.0 + 0.3 * (2.0 * x).cos() + 0.1 * x.sin())).abs() < 1e-13);
        let exact = x + 0.15 * (2.0 * x).sin() + 0.1 * (1.0 - x.cos());
        assert!((s.integral(x) - exact).abs() < 1e-13);
    }

    #[test]
    fn dong_examples() {
        let c = BoundaryProfile::from_arc_expression("1", TAU).unwrap();
        let d = dong_conditions(&c);
        assert!(d.turning_residual < 1e-12 && d.closure_residual < 1e-12);
        assert!(d.turning_ok && d.closure_ok && d.positivity_ok);
        let two = BoundaryProfile::from_arc_expression("2", TAU).unwrap();
        let d = dong_conditions(&two);
        assert!((d.turning - 2.0 * TAU).abs() < 1e-12);
        assert!(!d.turning_ok);
        assert!(!two.has_angle_parametrization());
        assert!(matches!(
            reference_curve(&two, 8),
            Err(BoundaryError::Turning(_))
        ));
    }

    #[test]
    fn non_positive_profiles_are_rejected() {
        assert!(matches!(
            BoundaryProfile::from_theta_expression("cos(x1)"),
            Err(BoundaryError::NonPositive { .. })
        ));
    }

    #[test]
    fn ode_examples() {
        let p = unit();
        let zero = |_: f64| 0.0;
        let sol = solve_boundary_ode(&p, &zero, 1.0, 0.0, 4096).unwrap();
        for (th, ps) in sol.theta.iter().zip(&sol.phi_s) {
            assert!((ps - th.cos()).abs() < 1e-9);
        }
        let f = |t: f64| (2.0 * t).sin();
        let sol = solve_boundary_ode(&p, &f, 0.3, -0.7, 4096).unwrap();
        assert!(sol.closed_form_deviation < 1e-8);
        for (k, th) in sol.theta.iter().enumerate() {
            assert!((sol.u[k] - 2.0 / 3.0 * th.sin().powi(3)).abs() < 1e-13);
            assert!((sol.v[k] - 2.0 / 3.0 * (1.0 - th.cos().powi(3))).abs() < 1e-13);
        }
        assert!(sol.u.last().unwrap().abs() < 1e-13 && sol.v.last().unwrap().abs() < 1e-13);
    }

    #[test]
    fn reference_curve_examples() {
        let rc = reference_curve(&unit(), 64).unwrap();
        assert!((rc.area - PI).abs() < 1e-10);
        for (k, th) in rc.theta.iter().enumerate() {
            assert!((rc.x1[k] - th.sin()).abs() < 1e-13);
            assert!((rc.x2[k] - (1.0 - th.cos())).abs() < 1e-13);
        }
        let c2 = BoundaryProfile::from_theta_expression("2").unwrap();
        assert!((reference_curve(&c2, 8).unwrap().area - PI / 4.0).abs() < 1e-10);
        let ell = BoundaryProfile::from_theta_expression("1 + 0.3*cos(2*x1)").unwrap();
        let rc = reference_curve(&ell, 256).unwrap();
        assert!(rc.closure_gap < 1e-8 && rc.area > 0.0);
        assert!(rc.curvature_residual < 1e-6);
    }

    #[test]
    fn uv_examples() {
        let p = unit();
        let f = |t: f64| (2.0 * t).sin();
        let uv = uv_functions(&p, &f, 64).unwrap();
        assert!(uv.c.abs() < 1e-13);
        assert!(uv.endpoint_residual < 1e-13 && uv.cot_residual < 1e-12);
        let c = |_: f64| 1.5;
        match uv_functions(&p, &c, 8) {
            Err(BoundaryError::Inadmissible { value, .. }) => {
                assert!((value - TAU * 1.5).abs() < 1e-10)
            }
            other => panic!("expected rejection, got {other:?}"),
        }
        let zero = |_: f64| 0.0;
        let uv = uv_functions(&p, &zero, 8).unwrap();
        assert!(uv.u_big.iter().chain(&uv.v_big).all(|v| *v == 0.0));
    }

    #[test]
    fn energy_examples() {
        let p = unit();
        let f = |t: f64| (2.0 * t).sin();
        let e = boundary_energy_inequality(&p, &f).unwrap();
        assert!((e.direct + PI / 3.0).abs() < 1e-8);
        assert!(e.agreement() < 1e-6);
        let zero = |_: f64| 0.0;
        assert_eq!(boundary_energy_inequality(&p, &zero).unwrap().value(), 0.0);
    }

    #[test]
    fn random_admissible_data_satisfy_the_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for kg in ["1", "1 + 0.3*cos(2*x1)"] {
            let p = BoundaryProfile::from_theta_expression(kg).unwrap();
            let proj = AdmissibleProjector::new(&p, 8).unwrap();
            for _ in 0..5 {
                let t = proj.random(&mut rng);
                let f = |th: f64| t.eval(th);
                let e = boundary_energy_inequality(&p, &f).unwrap();
                assert!(e.value() <= 1e-10, "{}", e.value());
                assert!(e.agreement() < 1e-6, "{}", e.agreement());
            }
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let p = unit();
        let proj = AdmissibleProjector::new(&p, 4).unwrap();
        let c: Vec<f64> = (0..9).map(|k| (k as f64 * 0.7).sin()).collect();
        let once = proj.project(&c);
        let twice = proj.project(&once);
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_profiles() {
        let mut text = String::from("theta,kg\n");
        for j in 0..32 {
            let th = TAU * j as f64 / 32.0;
            text.push_str(&format!("{th:.17},{}\n", 1.0 + 0.3 * (2.0 * th).cos()));
        }
        let p = BoundaryProfile::from_csv(text.as_bytes()).unwrap();
        assert_eq!(p.kind, ProfileKind::ThetaSamples);
        assert!((p.kg(0.4) - (1.0 + 0.3 * 0.8f64.cos())).abs() < 1e-12);
        let mut arc = String::from("s,kg\n");
        for j in 0..64 {
            arc.push_str(&format!("{:.17},1\n", TAU * j as f64 / 64.0));
        }
        let p = BoundaryProfile::from_csv(arc.as_bytes()).unwrap();
        assert!((p.length - TAU).abs() < 1e-12);
        assert!((p.kg(2.0) - 1.0).abs() < 1e-12);
        assert!(BoundaryProfile::from_csv("x,y\n0,1\n".as_bytes()).is_err());
    }

    #[test]
    fn arc_profile_of_ellipse_matches_theta_form() {
        // Ellipse (2 cos t, sin t): resample k(s) uniformly in s.
        let n = 512;
        let (a, b) = (2.0f64, 1.0f64);
        let speed = |t: f64| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
        let length = crate::quadrature::gauss_legendre(speed, 0.0, TAU, 64, 16).unwrap();
        let mut ks = Vec::with_capacity(n);
        let mut t = 0.0;
        for j in 0..n {
            let target = length * j as f64 / n as f64;
            for _ in 0..50 {
                let s = crate::quadrature::gauss_legendre(speed, 0.0, t, 16, 16).unwrap();
                t -= (s - target) / speed(t);
            }
            ks.push(a * b / speed(t).powi(3));
        }
        let p = BoundaryProfile::from_arc_samples(&ks, length).unwrap();
        let d = dong_conditions(&p);
        assert!(d.turning_residual < 1e-8 && d.closure_residual < 1e-8);
        // The turning angle from t = 0 satisfies b tan θ = a tan t.
        let th = 0.9f64;
        let t = (b * th.sin()).atan2(a * th.cos());
        assert!((p.kg(th) - a * b / speed(t).powi(3)).abs() < 1e-8);
    }

    #[test]
    fn lemma_hh_on_the_quartic_cap() {
        let q = catalog("quartic-cap").unwrap();
        let edge = BoundaryEdge {
            axis: 0,
            side: EdgeSide::Lo,
        };
        let rep = lemma_hh_check(&q, edge, 0.1, 32, 64).unwrap();
        assert!(rep.pass, "{rep:?}");
        let chart = geodesic_boundary_chart(&q, edge, 0.1, 32, 64).unwrap();
        let d = dong_conditions_on_chart(&chart).unwrap();
        assert!(d.turning_ok && d.closure_ok && d.positivity_ok, "{d:?}");
    }

    #[test]
    fn lemma_hh_preconditions() {
        let hemi = Immersion::parse(
            "hemisphere",
            &["cos(x1)*cos(x2)", "sin(x1)*cos(x2)", "sin(x2)"],
            vec![[0.0, TAU], [0.0, 1.4]],
            vec![true, false],
            Orientation::Outward,
        )
        .unwrap();
        let edge = BoundaryEdge {
            axis: 1,
            side: EdgeSide::Lo,
        };
        assert!(matches!(
            lemma_hh_check(&hemi, edge, 0.1, 16, 16),
            Err(BoundaryError::Precondition(_))
        ));
        let annulus = Immersion::parse(
            "annulus",
            &["x1*cos(x2)", "x1*sin(x2)", "0"],
            vec![[1.0, 2.0], [0.0, TAU]],
            vec![false, true],
            Orientation::Outward,
        )
        .unwrap();
        let edge = BoundaryEdge {
            axis: 0,
            side: EdgeSide::Lo,
        };
        assert!(matches!(
            lemma_hh_check(&annulus, edge, 0.1, 16, 16),
            Err(BoundaryError::Precondition(_))
        ));
    }
}
