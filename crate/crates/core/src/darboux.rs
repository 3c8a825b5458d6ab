//! Support function `ρ = |r|²/2`, `μ = r·n` and the Darboux identities.

use crate::expr::jetvec;
use crate::geometry::frame_at;
use crate::geometry::{GeometryError, Immersion, PointFrame};

/// Below this `|μ|` a point is support-degenerate and μ-divisions are skipped.
pub const MU_DEGENERATE: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct SupportData {
    pub rho: f64,
    /// Coordinate gradient `ρ_i`.
    pub grad_rho: Vec<f64>,
    /// Covariant Hessian `ρ_{;ij}`.
    pub hess_rho: Vec<Vec<f64>>,
    pub mu: f64,
}

pub(crate) fn support_from(im: &Immersion, x: &[f64]) -> Result<(PointFrame, SupportData), GeometryError> {
    let fr = frame_at(im, x)?;
    let r = im.jets(x, 2)?;
    let rho = jetvec::dot(&r, &r).scale(0.5);
    let n = im.dim();
    let grad_rho: Vec<f64> = (0..n).map(|i| rho.d1(i)).collect();
    let hess_rho = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    rho.d2(i, j)
                        - (0..n)
                            .map(|k| fr.christoffel[k][i][j] * grad_rho[k])
                            .sum::<f64>()
                })
                .collect()
        })
        .collect();
    let mu = fr
        .position
        .iter()
        .zip(&fr.normal)
        .map(|(a, b)| a * b)
        .sum();
    let sd = SupportData {
        rho: rho.value(),
        grad_rho,
        hess_rho,
        mu,
    };
    Ok((fr, sd))
}

pub fn support_at(im: &Immersion, x: &[f64]) -> Result<SupportData, GeometryError> {
    support_from(im, x).map(|(_, s)| s)
}

/// `(|μ² − (2ρ − |∇ρ|²)|, |r − (g^{ij}ρ_i r_j + μ n)|)`, both relative to
/// `max(1, |r|²)` and `max(1, |r|)` respectively.
pub fn support_residuals(im: &Immersion, x: &[f64]) -> Result<(f64, f64), GeometryError> {
    let (fr, sd) = support_from(im, x)?;
    let n = im.dim();
    let mut grad2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            grad2 += fr.metric_inv[i][j] * sd.grad_rho[i] * sd.grad_rho[j];
        }
    }
    let r2 = 2.0 * sd.rho;
    let e1 = (sd.mu * sd.mu - (r2 - grad2)).abs() / r2.max(1.0);
    let mut recon = fr.normal.iter().map(|v| sd.mu * v).collect::<Vec<f64>>();
    for i in 0..n {
        for j in 0..n {
            let c = fr.metric_inv[i][j] * sd.grad_rho[i];
            for (a, rv) in recon.iter_mut().enumerate() {
                *rv += c * fr.tangents[j][a];
            }
        }
    }
    let e2 = recon
        .iter()
        .zip(&fr.position)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / r2.sqrt().max(1.0);
    Ok((e1, e2))
}

/// `det(ρ_{;ij} − g_ij) − K det(g) μ²` (surfaces only).
pub fn darboux_residual(im: &Immersion, x: &[f64]) -> Result<f64, GeometryError> {
    if im.dim() != 2 {
        return Err(GeometryError::NeedsSurface(im.dim()));
    }
    let (fr, sd) = support_from(im, x)?;
    let a = |i: usize, j: usize| sd.hess_rho[i][j] - fr.metric[i][j];
    let lhs = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    Ok(lhs - fr.curvature * fr.det_g * sd.mu * sd.mu)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShapeCheck {
    pub mu: f64,
    /// `None` when the point is support-degenerate.
    pub residual: Option<f64>,
}

/// Componentwise `max |h_ij μ − (ρ_{;ij} − g_ij)|`.
pub fn verify_shape_identity(im: &Immersion, x: &[f64]) -> Result<ShapeCheck, GeometryError> {
    let (fr, sd) = support_from(im, x)?;
    if sd.mu.abs() < MU_DEGENERATE {
        return Ok(ShapeCheck {
            mu: sd.mu,
            residual: None,
        });
    }
    let n = im.dim();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let r = fr.second_form[i][j] * sd.mu - (sd.hess_rho[i][j] - fr.metric[i][j]);
            worst = worst.max(r.abs());
        }
    }
    Ok(ShapeCheck {
        mu: sd.mu,
        residual: Some(worst),
    })
}
