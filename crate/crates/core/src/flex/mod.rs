//! Infinitesimal flexes: deformation fields, the rotation vector, the
//! `w` tensor, support-function relations and discrete kernel certification.

mod operator;

pub use operator::{
    assemble_flex_operator, kernel_dimension, kernel_dimension_dense, FlexOperator, KernelMethod, KernelReport,
    KernelVerdict, Stencil, MAX_UNKNOWNS,
};

use crate::darboux::MU_DEGENERATE;
use crate::expr::{evaluate_jet, jetvec, parse_expression, Expr, Jet};
use crate::geometry::{covariant_hessian_of, frame_from_jets, normal_jets, GeometryError, Immersion};
use crate::linalg::LinalgError;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlexError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("needs a surface (n = 2), got n = {0}")]
    NeedsSurface(usize),
    #[error("generator is not skew-symmetric")]
    NotSkew,
    #[error("field has {got} components, ambient dimension is {need}")]
    Components { got: usize, need: usize },
    #[error("component {index}: {message}")]
    Parse { index: usize, message: String },
    #[error("E violates dr.dE = 0 (residual {residual:e} at {point:?})")]
    Precondition { residual: f64, point: Vec<f64> },
    #[error("normals are parallel; the 2x2 system is singular")]
    ParallelNormals,
    #[error("grid too coarse: {0}")]
    TooCoarse(String),
    #[error("{unknowns} unknowns exceed the dense limit of {limit}")]
    TooLarge { unknowns: usize, limit: usize },
    #[error("field file: {0}")]
    File(String),
}

/// A vector field `τ` along an immersion.
#[derive(Clone, Debug, PartialEq)]
pub enum DeformationField {
    /// `τ = A r + b` with `A` skew.
    Trivial { a: Vec<Vec<f64>>, b: Vec<f64> },
    /// Components as expressions in the chart variables.
    Expressions(Vec<Expr>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FieldFile {
    Trivial { trivial: TrivialFile },
    Components { components: Vec<String> },
}

#[derive(Serialize, Deserialize)]
struct TrivialFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl DeformationField {
    pub fn trivial(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self, FlexError> {
        let m = b.len();
        if a.len() != m || a.iter().any(|row| row.len() != m) {
            return Err(FlexError::Components { got: a.len(), need: m });
        }
        for i in 0..m {
            for j in 0..m {
                if a[i][j] != -a[j][i] {
                    return Err(FlexError::NotSkew);
                }
            }
        }
        Ok(DeformationField::Trivial { a, b })
    }

    /// Rotation about `axis` (`τ = axis × r`) plus a translation.
    pub fn rotation(axis: [f64; 3], b: [f64; 3]) -> Self {
        let [x, y, z] = axis;
        DeformationField::Trivial {
            a: vec![vec![0.0, -z, y], vec![z, 0.0, -x], vec![-y, x, 0.0]],
            b: b.to_vec(),
        }
    }

    /// Uniform entries in `[-1, 1]` for the strict upper triangle and `b`.
    pub fn random_trivial(rng: &mut impl Rng, ambient: usize) -> Self {
        let mut a = vec![vec![0.0; ambient]; ambient];
        for i in 0..ambient {
            for j in i + 1..ambient {
                let v: f64 = rng.gen_range(-1.0..1.0);
                a[i][j] = v;
                a[j][i] = -v;
            }
        }
        let b = (0..ambient).map(|_| rng.gen_range(-1.0..1.0)).collect();
        DeformationField::Trivial { a, b }
    }

    pub fn parse(components: &[&str], dim: usize) -> Result<Self, FlexError> {
        components
            .iter()
            .enumerate()
            .map(|(index, c)| {
                parse_expression(c, dim).map_err(|e| FlexError::Parse {
                    index,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(DeformationField::Expressions)
    }

    pub fn from_json(text: &str, dim: usize) -> Result<Self, FlexError> {
        let f: FieldFile = serde_json::from_str(text).map_err(|e| FlexError::File(e.to_string()))?;
        match f {
            FieldFile::Trivial { trivial } => DeformationField::trivial(trivial.a, trivial.b),
            FieldFile::Components { components } => {
                let refs: Vec<&str> = components.iter().map(String::as_str).collect();
                DeformationField::parse(&refs, dim)
            }
        }
    }

    pub fn to_json(&self) -> String {
        let f = match self {
            DeformationField::Trivial { a, b } => FieldFile::Trivial {
                trivial: TrivialFile {
                    a: a.clone(),
                    b: b.clone(),
                },
            },
            DeformationField::Expressions(e) => FieldFile::Components {
                components: e.iter().map(|c| c.to_string()).collect(),
            },
        };
        serde_json::to_string(&f).expect("field serializes")
    }

    /// Value at an ambient position (trivial motions only).
    pub fn at_position(&self, p: &[f64]) -> Option<Vec<f64>> {
        match self {
            DeformationField::Trivial { a, b } => Some(
                a.iter()
                    .zip(b)
                    .map(|(row, bi)| row.iter().zip(p).map(|(x, y)| x * y).sum::<f64>() + bi)
                    .collect(),
            ),
            DeformationField::Expressions(_) => None,
        }
    }

    /// Component jets of `τ`, given the position jets `r`.
    pub fn jets_with(&self, r: &[Jet], x: &[f64], order: u8) -> Result<Vec<Jet>, FlexError> {
        let m = r.len();
        match self {
            DeformationField::Trivial { a, b } => {
                if b.len() != m {
                    return Err(FlexError::Components { got: b.len(), need: m });
                }
                Ok((0..m)
                    .map(|i| jetvec::dot_const(r, &a[i]).add_const(b[i]).truncate(order))
                    .collect())
            }
            DeformationField::Expressions(e) => {
                if e.len() != m {
                    return Err(FlexError::Components { got: e.len(), need: m });
                }
                e.iter()
                    .map(|c| {
                        evaluate_jet(c, x, order)
                            .map_err(|err| FlexError::Geometry(GeometryError::from(err)))
                    })
                    .collect()
            }
        }
    }

    pub fn jets(&self, im: &Immersion, x: &[f64], order: u8) -> Result<Vec<Jet>, FlexError> {
        let r = im.jets(x, order)?;
        self.jets_with(&r, x, order)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// `r_i·τ_j + r_j·τ_i`.
pub fn first_order_residual(
    im: &Immersion,
    field: &DeformationField,
    x: &[f64],
) -> Result<Vec<Vec<f64>>, FlexError> {
    let r = im.jets(x, 1)?;
    let t = field.jets_with(&r, x, 1)?;
    let n = im.dim();
    let d = |v: &[Jet], i: usize| v.iter().map(|c| c.d1(i)).collect::<Vec<f64>>();
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|j| dot(&d(&r, i), &d(&t, j)) + dot(&d(&r, j), &d(&t, i)))
                .collect()
        })
        .collect())
}

fn max_abs(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
}

/// Jets shared by the rotation-vector computations at one point.
struct RotationJets {
    frame: crate::geometry::PointFrame,
    r: Vec<Jet>,
    tau: Vec<Jet>,
    n: Vec<Jet>,
    /// `Y`, two orders below the inputs.
    y: Vec<Jet>,
    u: [f64; 2],
    w: f64,
}

fn rotation_jets(im: &Immersion, field: &DeformationField, x: &[f64]) -> Result<RotationJets, FlexError> {
    if im.dim() != 2 {
        return Err(FlexError::NeedsSurface(im.dim()));
    }
    let r = im.jets(x, 3)?;
    let frame = frame_from_jets(im, x, &r)?;
    let tau = field.jets_with(&r, x, 3)?;
    let n = normal_jets(&r, im.orientation().sign());
    let r1 = jetvec::partial(&r, 0);
    let r2 = jetvec::partial(&r, 1);
    let t1 = jetvec::partial(&tau, 0);
    let t2 = jetvec::partial(&tau, 1);
    let sigma = jetvec::dot(&jetvec::cross(&r1, &r2), &n);
    let inv_sigma = sigma.recip();
    let u1 = jetvec::dot(&n, &t1);
    let u2 = jetvec::dot(&n, &t2);
    let w = (&jetvec::dot(&r2, &t1) - &jetvec::dot(&r1, &t2)).scale(0.5) * inv_sigma.clone();
    let y: Vec<Jet> = (0..3)
        .map(|a| &(&(&(&u2 * &r1[a]) - &(&u1 * &r2[a])) * &inv_sigma) + &(&w * &n[a]))
        .collect();
    Ok(RotationJets {
        frame,
        r,
        tau,
        n,
        y,
        u: [u1.value(), u2.value()],
        w: w.value(),
    })
}

/// Pointwise rotation data of a flex on a surface.
#[derive(Clone, Debug)]
pub struct RotationData {
    /// `u_i = n·τ_i`.
    pub u: [f64; 2],
    pub w: f64,
    pub y: [f64; 3],
    /// `Y_k = ∂_k Y`.
    pub dy: [[f64; 3]; 2],
    /// `a[k][l]` with `Y_k = a_k^l r_l`.
    pub a: [[f64; 2]; 2],
    /// `max |n·Y_k|`.
    pub normal_leak: f64,
    /// `max_i |τ_i − Y × r_i|`.
    pub residual: f64,
    /// Whether `τ` satisfies `dr·dτ = 0` here.
    pub is_flex: bool,
}

pub fn rotation_data(
    im: &Immersion,
    field: &DeformationField,
    x: &[f64],
) -> Result<RotationData, FlexError> {
    let rj = rotation_jets(im, field, x)?;
    let fr = &rj.frame;
    let yv = jetvec::values(&rj.y);
    let y = [yv[0], yv[1], yv[2]];
    let mut residual: f64 = 0.0;
    for i in 0..2 {
        let ti: Vec<f64> = rj.tau.iter().map(|c| c.d1(i)).collect();
        let yr = cross(&y, &fr.tangents[i]);
        for a in 0..3 {
            residual = residual.max((ti[a] - yr[a]).abs());
        }
    }
    let mut dy = [[0.0; 3]; 2];
    let mut a = [[0.0; 2]; 2];
    let mut normal_leak: f64 = 0.0;
    for k in 0..2 {
        for c in 0..3 {
            dy[k][c] = rj.y[c].d1(k);
        }
        normal_leak = normal_leak.max(dot(&dy[k], &fr.normal).abs());
        for l in 0..2 {
            a[k][l] = (0..2)
                .map(|m| fr.metric_inv[l][m] * dot(&dy[k], &fr.tangents[m]))
                .sum();
        }
    }
    let first = first_order_residual(im, field, x)?;
    let scale = fr.tangent_scale().max(1.0);
    let is_flex = max_abs(&first) <= 1e-8 * scale * scale && residual <= 1e-8 * scale;
    Ok(RotationData {
        u: rj.u,
        w: rj.w,
        y,
        dy,
        a,
        normal_leak,
        residual,
        is_flex,
    })
}

/// `w_ij = Y_i·(n × r_j)` with covariant derivatives.
#[derive(Clone, Debug)]
pub struct WTensor {
    pub w: [[f64; 2]; 2],
    /// `dw[i][j][k] = w_{ij,k}`.
    pub dw: [[[f64; 2]; 2]; 2],
    pub symmetry_residual: f64,
    /// `|h^{ij} w_ij|`, or `|h_11 w_22 + h_22 w_11 − 2 h_12 w_12|` when `h`
    /// is singular.
    pub trace_residual: f64,
    pub codazzi_residual: f64,
}

pub fn w_tensor(im: &Immersion, field: &DeformationField, x: &[f64]) -> Result<WTensor, FlexError> {
    let rj = rotation_jets(im, field, x)?;
    let fr = &rj.frame;
    let r_t: Vec<Vec<Jet>> = (0..2).map(|m| jetvec::partial(&rj.r, m)).collect();
    let n_cross: Vec<Vec<Jet>> = r_t.iter().map(|rm| jetvec::cross(&rj.n, rm)).collect();
    let yk: Vec<Vec<Jet>> = (0..2).map(|k| jetvec::partial(&rj.y, k)).collect();
    let wj: Vec<Vec<Jet>> = (0..2)
        .map(|k| (0..2).map(|m| jetvec::dot(&yk[k], &n_cross[m])).collect())
        .collect();
    let mut w = [[0.0; 2]; 2];
    let mut dw = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            w[i][j] = wj[i][j].value();
        }
    }
    let g = &fr.christoffel;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let mut v = wj[i][j].d1(k);
                for l in 0..2 {
                    v -= g[l][k][i] * w[l][j] + g[l][k][j] * w[i][l];
                }
                dw[i][j][k] = v;
            }
        }
    }
    let h = &fr.second_form;
    let det_h = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let hs = max_abs(h);
    let cof = h[0][0] * w[1][1] + h[1][1] * w[0][0] - h[0][1] * w[1][0] - h[1][0] * w[0][1];
    let trace_residual = if det_h.abs() > 1e-10 * hs * hs && hs > 0.0 {
        (cof / det_h).abs()
    } else {
        cof.abs()
    };
    let mut codazzi: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                codazzi = codazzi.max((dw[i][j][k] - dw[i][k][j]).abs());
            }
        }
    }
    Ok(WTensor {
        w,
        dw,
        symmetry_residual: (w[0][1] - w[1][0]).abs(),
        trace_residual,
        codazzi_residual: codazzi,
    })
}

/// Support-function relations of a flex.
#[derive(Clone, Debug)]
pub struct PhiCheck {
    /// `φ = r·τ`.
    pub phi: f64,
    pub mu: f64,
    /// `ν = 2(φ − ∇φ·∇ρ)`.
    pub nu: f64,
    /// `b = τ − Y × r`.
    pub b: [f64; 3],
    /// `max |w_ij + φ_{;ij}/μ − h_ij ν/(2μ²)|`; `None` when `|μ|` is tiny.
    pub residual: Option<f64>,
    /// `|b − (g^{ij}φ_i r_j + ((φ − ∇φ·∇ρ)/μ) n)|`; `None` when `|μ|` is tiny.
    pub b_residual: Option<f64>,
}

pub fn phi_relation_residual(
    im: &Immersion,
    field: &DeformationField,
    x: &[f64],
) -> Result<PhiCheck, FlexError> {
    let wt = w_tensor(im, field, x)?;
    let rj = rotation_jets(im, field, x)?;
    let fr = &rj.frame;
    let phi = jetvec::dot(&rj.r, &rj.tau);
    let rho = jetvec::dot(&rj.r, &rj.r).scale(0.5);
    let phi_hess = covariant_hessian_of(fr, &phi);
    let mut grad_dot = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            grad_dot += fr.metric_inv[i][j] * phi.d1(i) * rho.d1(j);
        }
    }
    let mu = dot(&fr.position, &fr.normal);
    let nu = 2.0 * (phi.value() - grad_dot);
    let yv = jetvec::values(&rj.y);
    let yr = cross(&yv, &fr.position);
    let tau = jetvec::values(&rj.tau);
    let b = [tau[0] - yr[0], tau[1] - yr[1], tau[2] - yr[2]];
    if mu.abs() < MU_DEGENERATE {
        return Ok(PhiCheck {
            phi: phi.value(),
            mu,
            nu,
            b,
            residual: None,
            b_residual: None,
        });
    }
    let mut residual: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let v = wt.w[i][j] + phi_hess[i][j] / mu - fr.second_form[i][j] * nu / (2.0 * mu * mu);
            residual = residual.max(v.abs());
        }
    }
    let mut recon: Vec<f64> = fr.normal.iter().map(|c| c * nu / (2.0 * mu)).collect();
    for i in 0..2 {
        for j in 0..2 {
            let c = fr.metric_inv[i][j] * phi.d1(i);
            for (a, v) in recon.iter_mut().enumerate() {
                *v += c * fr.tangents[j][a];
            }
        }
    }
    let b_residual = (0..3).map(|a| (b[a] - recon[a]).abs()).fold(0.0, f64::max);
    Ok(PhiCheck {
        phi: phi.value(),
        mu,
        nu,
        b,
        residual: Some(residual),
        b_residual: Some(b_residual),
    })
}

/// Max over the interior grid of `|∂_1(Y_2·E) − ∂_2(Y_1·E)|`, evaluated
/// exactly from jets. `E` must satisfy `dr·dE = 0`.
pub fn closed_one_form_residual(
    im: &Immersion,
    tau: &DeformationField,
    e: &DeformationField,
    counts: &[usize],
) -> Result<f64, FlexError> {
    let mut worst: f64 = 0.0;
    for x in im.interior_grid(counts) {
        let fr = crate::geometry::frame_at(im, &x)?;
        let pre = max_abs(&first_order_residual(im, e, &x)?);
        let scale = fr.tangent_scale().max(1.0);
        if pre > 1e-10 * scale * scale {
            return Err(FlexError::Precondition {
                residual: pre,
                point: x,
            });
        }
        let rj = rotation_jets(im, tau, &x)?;
        let ej = e.jets_with(&rj.r, &x, 3)?;
        let omega: Vec<Jet> = (0..2)
            .map(|k| jetvec::dot(&jetvec::partial(&rj.y, k), &ej))
            .collect();
        worst = worst.max((omega[1].d1(0) - omega[0].d1(1)).abs());
    }
    Ok(worst)
}

/// Boundary-adapted trivial field `E = (n1 × n2) × (x + c1 n1 + c2 n2)`.
#[derive(Clone, Debug)]
pub struct AdaptedField {
    pub c1: f64,
    pub c2: f64,
    pub axis: [f64; 3],
    pub field: DeformationField,
}

/// Solves `[[1, n1·n2], [n1·n2, 1]] (c1, c2) = −(μ1, μ2)`.
pub fn boundary_adapted_field(
    n1: [f64; 3],
    n2: [f64; 3],
    mu1: f64,
    mu2: f64,
) -> Result<AdaptedField, FlexError> {
    let axis = cross(&n1, &n2);
    if dot(&axis, &axis).sqrt() <= 1e-10 {
        return Err(FlexError::ParallelNormals);
    }
    let c = dot(&n1, &n2);
    let det = 1.0 - c * c;
    let c1 = (-mu1 + c * mu2) / det;
    let c2 = (-mu2 + c * mu1) / det;
    let shift: Vec<f64> = (0..3).map(|a| c1 * n1[a] + c2 * n2[a]).collect();
    let b = cross(&axis, &shift);
    Ok(AdaptedField {
        c1,
        c2,
        axis,
        field: DeformationField::rotation(axis, b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::catalog;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_order_examples() {
        let s = catalog("sphere(1)").unwrap();
        let x = [0.7, 0.2];
        let c = DeformationField::trivial(vec![vec![0.0; 3]; 3], vec![0.0, 0.0, 1.0]).unwrap();
        assert!(max_abs(&first_order_residual(&s, &c, &x).unwrap()) < 1e-12);
        let rot = DeformationField::rotation([0.0, 0.0, 1.0], [0.0; 3]);
        assert!(max_abs(&first_order_residual(&s, &rot, &x).unwrap()) < 1e-12);
        let dil = DeformationField::parse(
            &["cos(x1)*cos(x2)", "sin(x1)*cos(x2)", "sin(x2)"],
            2,
        )
        .unwrap();
        let res = first_order_residual(&s, &dil, &x).unwrap();
        let fr = crate::geometry::frame_at(&s, &x).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((res[i][j] - 2.0 * fr.metric[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn skew_is_enforced() {
        let a = vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0; 3]];
        assert_eq!(
            DeformationField::trivial(a, vec![0.0; 3]),
            Err(FlexError::NotSkew)
        );
    }

    #[test]
    fn rotation_vector_examples() {
        let s = catalog("sphere(1)").unwrap();
        let x = [1.1, -0.4];
        let c = DeformationField::rotation([0.0; 3], [1.0, 2.0, 3.0]);
        let rd = rotation_data(&s, &c, &x).unwrap();
        assert!(rd.y.iter().all(|v| v.abs() < 1e-14));
        let a = [0.3, -0.5, 0.8];
        let rot = DeformationField::rotation(a, [0.0; 3]);
        for x in [[1.1, -0.4], [4.0, 0.9]] {
            let rd = rotation_data(&s, &rot, &x).unwrap();
            assert!(rd.is_flex);
            for k in 0..3 {
                assert!((rd.y[k] - a[k]).abs() < 1e-12);
            }
            assert!(rd.dy.iter().flatten().all(|v| v.abs() < 1e-12));
        }
        let dil = DeformationField::parse(
            &["cos(x1)*cos(x2)", "sin(x1)*cos(x2)", "sin(x2)"],
            2,
        )
        .unwrap();
        let rd = rotation_data(&s, &dil, &x).unwrap();
        assert!(!rd.is_flex && rd.residual > 0.1);
    }

    #[test]
    fn inward_orientation_gives_same_rotation() {
        let s = catalog("sphere(1)").unwrap().with_orientation(crate::geometry::Orientation::Inward);
        let a = [0.3, -0.5, 0.8];
        let rd = rotation_data(&s, &DeformationField::rotation(a, [0.0; 3]), &[0.4, 0.2]).unwrap();
        for k in 0..3 {
            assert!((rd.y[k] - a[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn trivial_motions_have_zero_w() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for spec in ["sphere(1)", "ellipsoid(2,1,1)", "saddle", "quartic-cap"] {
            let im = catalog(spec).unwrap();
            for _ in 0..5 {
                let f = DeformationField::random_trivial(&mut rng, 3);
                let x = im.sample_interior(&mut rng, 0.05);
                let wt = w_tensor(&im, &f, &x).unwrap();
                assert!(max_abs(&wt.w.iter().map(|r| r.to_vec()).collect::<Vec<_>>()) < 1e-10);
                assert!(wt.symmetry_residual < 1e-10 && wt.trace_residual < 1e-10);
                let pc = phi_relation_residual(&im, &f, &x).unwrap();
                if let Some(r) = pc.residual {
                    assert!(r < 1e-8, "{spec}: {r}");
                    assert!(pc.b_residual.unwrap() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn constant_field_on_translated_sphere() {
        let s = catalog("sphere(1)").unwrap().translate(&[0.5, 0.0, 2.0]);
        let f = DeformationField::rotation([0.0; 3], [0.2, -1.0, 0.4]);
        let pc = phi_relation_residual(&s, &f, &[0.3, 0.5]).unwrap();
        assert!(pc.residual.unwrap() < 1e-8);
    }

    #[test]
    fn plane_through_origin_skips_phi_relation() {
        let p = catalog("plane").unwrap();
        let f = DeformationField::rotation([0.0, 0.0, 1.0], [0.0; 3]);
        assert_eq!(phi_relation_residual(&p, &f, &[0.2, 0.3]).unwrap().residual, None);
    }

    #[test]
    fn normal_flex_of_lifted_plane() {
        // z = 1 plane with τ = (0, 0, f): w = −f_ij.
        let im = Immersion::parse(
            "lifted",
            &["x1", "x2", "1"],
            vec![[-1.0, 1.0], [-1.0, 1.0]],
            vec![false, false],
            crate::geometry::Orientation::Outward,
        )
        .unwrap();
        let f = DeformationField::parse(&["0", "0", "x1^2*x2 + sin(x2)"], 2).unwrap();
        let x = [0.3, -0.6];
        let wt = w_tensor(&im, &f, &x).unwrap();
        let expected = [[-2.0 * x[1], -2.0 * x[0]], [-2.0 * x[0], x[1].sin()]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((wt.w[i][j] - expected[i][j]).abs() < 1e-12);
            }
        }
        assert!(wt.codazzi_residual < 1e-12);
        let pc = phi_relation_residual(&im, &f, &x).unwrap();
        assert!(pc.residual.unwrap() < 1e-12);
        assert!(pc.b_residual.unwrap() < 1e-12);
    }

    #[test]
    fn closed_form_checks() {
        let s = catalog("sphere(1)").unwrap();
        let tau = DeformationField::rotation([0.2, 0.1, -0.7], [0.3, 0.0, 1.0]);
        let k = DeformationField::rotation([0.0; 3], [0.0, 0.0, 1.0]);
        let ixr = DeformationField::rotation([1.0, 0.0, 0.0], [0.0; 3]);
        for e in [&k, &ixr] {
            assert!(closed_one_form_residual(&s, &tau, e, &[8, 6]).unwrap() < 1e-7);
        }
        let r = DeformationField::parse(&["cos(x1)*cos(x2)", "sin(x1)*cos(x2)", "sin(x2)"], 2)
            .unwrap();
        assert!(matches!(
            closed_one_form_residual(&s, &tau, &r, &[4, 4]),
            Err(FlexError::Precondition { .. })
        ));
    }

    #[test]
    fn adapted_field_examples() {
        let a = boundary_adapted_field([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], 1.0, 1.0).unwrap();
        assert!((a.c1 + 1.0).abs() < 1e-15 && (a.c2 + 1.0).abs() < 1e-15);
        let z = boundary_adapted_field([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], 0.0, 0.0).unwrap();
        assert_eq!((z.c1, z.c2), (0.0, 0.0));
        assert_eq!(
            boundary_adapted_field([0.0, 0.0, 1.0], [0.0, 0.0, 1.0], 1.0, 1.0).unwrap_err(),
            FlexError::ParallelNormals
        );
        // E is parallel to n1 on the plane {x·n1 = μ1}.
        let n1 = [0.0, 0.0, 1.0];
        let n2 = [0.6, 0.0, 0.8];
        let f = boundary_adapted_field(n1, n2, 0.5, 0.3).unwrap();
        let p = [0.4, -0.7, 0.5];
        let e = f.field.at_position(&p).unwrap();
        let c = cross(&e, &n1);
        assert!(c.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn field_json_round_trip() {
        let f = DeformationField::rotation([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]);
        assert_eq!(DeformationField::from_json(&f.to_json(), 2).unwrap(), f);
        let g = DeformationField::from_json(r#"{"components": ["0", "x1", "x2^2"]}"#, 2).unwrap();
        assert!(matches!(g, DeformationField::Expressions(ref v) if v.len() == 3));
    }
}
