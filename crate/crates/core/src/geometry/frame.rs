use super::{GeometryError, Immersion};
use crate::expr::{evaluate_jet, jetvec, Expr, Jet};
use crate::linalg::{det, inverse, DenseMatrix};

/// Pointwise differential-geometric data of an immersion.
#[derive(Clone, Debug)]
pub struct PointFrame {
    pub point: Vec<f64>,
    pub position: Vec<f64>,
    /// `tangents[i]` is `∂_i r`.
    pub tangents: Vec<Vec<f64>>,
    /// `second[i][j]` is `∂_i ∂_j r`.
    pub second: Vec<Vec<Vec<f64>>>,
    pub normal: Vec<f64>,
    pub metric: Vec<Vec<f64>>,
    pub metric_inv: Vec<Vec<f64>>,
    pub det_g: f64,
    pub second_form: Vec<Vec<f64>>,
    /// `christoffel[k][i][j]` is `Γ^k_ij`.
    pub christoffel: Vec<Vec<Vec<f64>>>,
    /// Gauss–Kronecker curvature `det h / det g`.
    pub curvature: f64,
    /// `(r_1 ∧ … ∧ r_n)·n`, equal to `±√det g`.
    pub volume_sign: f64,
}

impl PointFrame {
    pub fn dim(&self) -> usize {
        self.point.len()
    }

    /// Largest tangent norm, used as a length scale for tolerances.
    pub fn tangent_scale(&self) -> f64 {
        self.tangents.iter().map(|t| norm(t)).fold(0.0, f64::max)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Generalized cross product of `n` vectors in `R^{n+1}`: the vector `N` with
/// `N·v = det[v_1; …; v_n; v]`.
pub fn generalized_cross(vectors: &[Vec<f64>]) -> Vec<f64> {
    let n = vectors.len();
    let m = n + 1;
    (0..m)
        .map(|gamma| {
            let minor = DenseMatrix::from_fn(n, n, |i, j| {
                let col = if j < gamma { j } else { j + 1 };
                vectors[i][col]
            });
            let sign = if (n + gamma) % 2 == 0 { 1.0 } else { -1.0 };
            sign * det(&minor)
        })
        .collect()
}

fn jet_det(m: &[Vec<Jet>]) -> Jet {
    let n = m.len();
    if n == 1 {
        return m[0][0].clone();
    }
    if n == 2 {
        return &(&m[0][0] * &m[1][1]) - &(&m[0][1] * &m[1][0]);
    }
    let mut acc: Option<Jet> = None;
    for j in 0..n {
        let minor: Vec<Vec<Jet>> = m[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(c, _)| *c != j)
                    .map(|(_, v)| v.clone())
                    .collect()
            })
            .collect();
        let term = &m[0][j] * &jet_det(&minor);
        let term = if j % 2 == 0 { term } else { -term };
        acc = Some(match acc {
            None => term,
            Some(a) => &a + &term,
        });
    }
    acc.unwrap()
}

/// Jets of the oriented unit normal, one order below the position jets.
pub fn normal_jets(r: &[Jet], orientation_sign: f64) -> Vec<Jet> {
    let m = r.len();
    let n = m - 1;
    let tangents: Vec<Vec<Jet>> = (0..n).map(|i| jetvec::partial(r, i)).collect();
    let big: Vec<Jet> = if n == 2 {
        jetvec::cross(&tangents[0], &tangents[1])
    } else {
        (0..m)
            .map(|gamma| {
                let minor: Vec<Vec<Jet>> = tangents
                    .iter()
                    .map(|t| {
                        (0..m)
                            .filter(|&c| c != gamma)
                            .map(|c| t[c].clone())
                            .collect()
                    })
                    .collect();
                let d = jet_det(&minor);
                if (n + gamma) % 2 == 0 {
                    d
                } else {
                    -d
                }
            })
            .collect()
    };
    let len = jetvec::dot(&big, &big).sqrt();
    let inv = len.recip().scale(orientation_sign);
    jetvec::scale(&big, &inv)
}

/// Builds the frame from position jets of order ≥ 2.
pub(crate) fn frame_from_jets(
    im: &Immersion,
    x: &[f64],
    r: &[Jet],
) -> Result<PointFrame, GeometryError> {
    let n = im.dim();
    let m = n + 1;
    let position: Vec<f64> = r.iter().map(|j| j.value()).collect();
    let tangents: Vec<Vec<f64>> = (0..n).map(|i| (0..m).map(|a| r[a].d1(i)).collect()).collect();
    let second: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..m).map(|a| r[a].d2(i, j)).collect())
                .collect()
        })
        .collect();
    let metric: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| dot(&tangents[i], &tangents[j])).collect())
        .collect();
    let gm = DenseMatrix::from_rows(&metric);
    let det_g = det(&gm);
    let scale = tangents.iter().map(|t| norm(t)).fold(0.0, f64::max);
    if !(det_g > 1e-12 * scale.powi(2 * n as i32)) {
        return Err(GeometryError::Degenerate {
            point: x.to_vec(),
            det: det_g,
        });
    }
    let metric_inv = inverse(&gm)
        .ok_or(GeometryError::Degenerate {
            point: x.to_vec(),
            det: det_g,
        })?
        .to_rows();
    let big = generalized_cross(&tangents);
    let big_len = norm(&big);
    let sign = im.orientation().sign();
    let normal: Vec<f64> = big.iter().map(|v| sign * v / big_len).collect();
    let volume_sign = sign * big_len;
    let second_form: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| dot(&second[i][j], &normal)).collect())
        .collect();
    let christoffel: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|k| {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            (0..n)
                                .map(|l| metric_inv[k][l] * dot(&second[i][j], &tangents[l]))
                                .sum()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let curvature = det(&DenseMatrix::from_rows(&second_form)) / det_g;
    Ok(PointFrame {
        point: x.to_vec(),
        position,
        tangents,
        second,
        normal,
        metric,
        metric_inv,
        det_g,
        second_form,
        christoffel,
        curvature,
        volume_sign,
    })
}

/// Frame, metric, second fundamental form, connection and curvature at `x`.
pub fn frame_at(im: &Immersion, x: &[f64]) -> Result<PointFrame, GeometryError> {
    if !im.contains(x) {
        return Err(GeometryError::OutsideDomain { point: x.to_vec() });
    }
    let r = im.jets(x, 2)?;
    frame_from_jets(im, x, &r)
}

/// `f_{,ij} - Γ^k_ij f_{,k}`.
pub fn covariant_hessian(
    im: &Immersion,
    field: &Expr,
    x: &[f64],
) -> Result<Vec<Vec<f64>>, GeometryError> {
    let fr = frame_at(im, x)?;
    let f = evaluate_jet(field, x, 2)?;
    Ok(covariant_hessian_of(&fr, &f))
}

pub(crate) fn covariant_hessian_of(fr: &PointFrame, f: &Jet) -> Vec<Vec<f64>> {
    let n = fr.dim();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    f.d2(i, j)
                        - (0..n)
                            .map(|k| fr.christoffel[k][i][j] * f.d1(k))
                            .sum::<f64>()
                })
                .collect()
        })
        .collect()
}

/// Covariant derivatives `h_{ij,k}` as `[i][j][k]`.
pub fn second_form_derivatives(
    im: &Immersion,
    x: &[f64],
) -> Result<Vec<Vec<Vec<f64>>>, GeometryError> {
    let r = im.jets(x, 3)?;
    let fr = frame_from_jets(im, x, &r)?;
    let n = im.dim();
    let m = n + 1;
    let h = &fr.second_form;
    // n_k = -h_kl g^{lm} r_m
    let dn: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let mut v = vec![0.0; m];
            for l in 0..n {
                for p in 0..n {
                    let c = h[k][l] * fr.metric_inv[l][p];
                    for a in 0..m {
                        v[a] -= c * fr.tangents[p][a];
                    }
                }
            }
            v
        })
        .collect();
    let mut out = vec![vec![vec![0.0; n]; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let rijk: Vec<f64> = (0..m).map(|a| r[a].d3(i, j, k)).collect();
                let mut v = dot(&rijk, &fr.normal) + dot(&fr.second[i][j], &dn[k]);
                for p in 0..n {
                    v -= fr.christoffel[p][k][i] * h[p][j] + fr.christoffel[p][k][j] * h[i][p];
                }
                out[i][j][k] = v;
            }
        }
    }
    Ok(out)
}

/// `max |h_{ij,k} - h_{ik,j}|`.
pub fn codazzi_residual(dh: &[Vec<Vec<f64>>]) -> f64 {
    let n = dh.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                worst = worst.max((dh[i][j][k] - dh[i][k][j]).abs());
            }
        }
    }
    worst
}

/// Intrinsic Gaussian curvature from the metric and its first two
/// derivatives (Brioschi formula). Surfaces only.
pub fn brioschi_curvature(im: &Immersion, x: &[f64]) -> Result<f64, GeometryError> {
    if im.dim() != 2 {
        return Err(GeometryError::NeedsSurface(im.dim()));
    }
    let r = im.jets(x, 3)?;
    let m = 3;
    let ri = |i: usize| -> Vec<f64> { (0..m).map(|c| r[c].d1(i)).collect() };
    let rij = |i: usize, j: usize| -> Vec<f64> { (0..m).map(|c| r[c].d2(i, j)).collect() };
    let rijk = |i: usize, j: usize, k: usize| -> Vec<f64> { (0..m).map(|c| r[c].d3(i, j, k)).collect() };
    // g_ab and derivatives
    let g = |a: usize, b: usize| dot(&ri(a), &ri(b));
    let dg = |a: usize, b: usize, k: usize| dot(&rij(a, k), &ri(b)) + dot(&ri(a), &rij(b, k));
    let ddg = |a: usize, b: usize, k: usize, l: usize| {
        dot(&rijk(a, k, l), &ri(b))
            + dot(&rij(a, k), &rij(b, l))
            + dot(&rij(a, l), &rij(b, k))
            + dot(&ri(a), &rijk(b, k, l))
    };
    let (e, f, gg) = (g(0, 0), g(0, 1), g(1, 1));
    let (e_u, e_v) = (dg(0, 0, 0), dg(0, 0, 1));
    let (f_u, f_v) = (dg(0, 1, 0), dg(0, 1, 1));
    let (g_u, g_v) = (dg(1, 1, 0), dg(1, 1, 1));
    let e_vv = ddg(0, 0, 1, 1);
    let f_uv = ddg(0, 1, 0, 1);
    let g_uu = ddg(1, 1, 0, 0);
    let m1 = DenseMatrix::from_rows(&[
        vec![-0.5 * e_vv + f_uv - 0.5 * g_uu, 0.5 * e_u, f_u - 0.5 * e_v],
        vec![f_v - 0.5 * g_u, e, f],
        vec![0.5 * g_v, f, gg],
    ]);
    let m2 = DenseMatrix::from_rows(&[
        vec![0.0, 0.5 * e_v, 0.5 * g_u],
        vec![0.5 * e_v, e, f],
        vec![0.5 * g_u, f, gg],
    ]);
    let w = e * gg - f * f;
    Ok((det(&m1) - det(&m2)) / (w * w))
}
