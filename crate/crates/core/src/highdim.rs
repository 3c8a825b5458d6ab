//! Hypersurfaces in `R^{n+1}`: generalized Kronecker deltas, the rotation
//! bivector of a flex, and the pointwise linearized Gauss system.

use crate::expr::{jetvec, Jet};
use crate::flex::{DeformationField, FlexError};
use crate::geometry::{frame_from_jets, generalized_cross, normal_jets, GeometryError, Immersion};
use crate::linalg::{lstsq, null_space, singular_values, svd, symmetric_eigen, DenseMatrix, LinalgError};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HighDimError {
    #[error("index {index} out of range 1..={max}")]
    IndexRange { index: usize, max: usize },
    #[error("upper and lower index lists differ in length")]
    Length,
    #[error("needs n >= {need}, got n = {got}")]
    Dimension { need: usize, got: usize },
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Flex(#[from] FlexError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("rank {rank} and null-space dimension {null_dim} disagree: {detail}")]
    Inconsistent {
        rank: usize,
        null_dim: usize,
        detail: String,
    },
}

/// `δ^{upper}_{lower}` with 1-based indices in `1..=max`.
pub fn generalized_kronecker(upper: &[usize], lower: &[usize], max: usize) -> Result<i8, HighDimError> {
    if upper.len() != lower.len() {
        return Err(HighDimError::Length);
    }
    for &index in upper.iter().chain(lower) {
        if index == 0 || index > max {
            return Err(HighDimError::IndexRange { index, max });
        }
    }
    Ok(kronecker_unchecked(upper, lower))
}

fn kronecker_unchecked(upper: &[usize], lower: &[usize]) -> i8 {
    let k = upper.len();
    for a in 0..k {
        for b in a + 1..k {
            if upper[a] == upper[b] {
                return 0;
            }
        }
    }
    // perm[a] = position in `upper` of lower[a].
    let mut perm = Vec::with_capacity(k);
    for l in lower {
        match upper.iter().position(|u| u == l) {
            Some(p) if !perm.contains(&p) => perm.push(p),
            _ => return 0,
        }
    }
    let mut seen = vec![false; k];
    let mut sign = 1i8;
    for start in 0..k {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut c = start;
        while !seen[c] {
            seen[c] = true;
            c = perm[c];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// Rotation bivector of a flex: `Y_i = W_i^{αβ} e_α ∧ e_β`.
#[derive(Clone, Debug, Serialize)]
pub struct BivectorDecomposition {
    /// `big_w[i][α][β]`, antisymmetric in `(α, β)`, 0-based.
    pub big_w: Vec<Vec<Vec<f64>>>,
    /// `w_ij = 2 W_i^{j(n+1)} √|g|`.
    pub w: Vec<Vec<f64>>,
    /// `max |W_i^{jγ}|` over tangential `j, γ`.
    pub tangential_residual: f64,
    pub symmetry_residual: f64,
    /// Least-squares misfit of `∂_i Ω` in the bivector basis.
    pub fit_residual: f64,
}

fn linear_jet(value: f64, grad: &[f64], order: u8) -> Jet {
    let n = grad.len();
    let mut j = Jet::constant(value, n, order);
    for (k, g) in grad.iter().enumerate() {
        j = &j + &Jet::variable(k, 0.0, n, order).scale(*g);
    }
    j
}

/// Inverse of a matrix of order-1 jets, `∂(G⁻¹) = −G⁻¹ (∂G) G⁻¹`.
fn inverse_order1(g: &[Vec<Jet>]) -> Option<Vec<Vec<Jet>>> {
    let n = g.len();
    let dim = g[0][0].dim();
    let g0 = DenseMatrix::from_fn(n, n, |i, j| g[i][j].value());
    let inv = crate::linalg::inverse(&g0)?;
    let mut dinv = vec![vec![vec![0.0; dim]; n]; n];
    for k in 0..dim {
        let dg = DenseMatrix::from_fn(n, n, |i, j| g[i][j].d1(k));
        let d = inv.matmul(&dg).matmul(&inv);
        for i in 0..n {
            for j in 0..n {
                dinv[i][j][k] = -d.get(i, j);
            }
        }
    }
    Some(
        (0..n)
            .map(|i| (0..n).map(|j| linear_jet(inv.get(i, j), &dinv[i][j], 1)).collect())
            .collect(),
    )
}

/// Matrix of `v ↦ Y × v` for the basis element `e_α ∧ e_β` (0-based),
/// where `e` is the frame `r_1, …, r_n, ν`.
fn basis_map(frame: &[Vec<f64>], alpha: usize, beta: usize) -> DenseMatrix {
    let m = frame.len();
    let rest: Vec<usize> = (0..m).filter(|&k| k != alpha && k != beta).collect();
    let upper: Vec<usize> = (1..=m).collect();
    let mut lower: Vec<usize> = rest.iter().map(|k| k + 1).collect();
    lower.push(alpha + 1);
    lower.push(beta + 1);
    let sigma = kronecker_unchecked(&upper, &lower) as f64;
    let mut out = DenseMatrix::zeros(m, m);
    for b in 0..m {
        let mut vs: Vec<Vec<f64>> = rest.iter().map(|&k| frame[k].clone()).collect();
        let mut e = vec![0.0; m];
        e[b] = 1.0;
        vs.push(e);
        let col = generalized_cross(&vs);
        for a in 0..m {
            out.set(a, b, sigma * col[a]);
        }
    }
    out
}

pub fn decompose_rotation_bivector(
    im: &Immersion,
    field: &DeformationField,
    x: &[f64],
) -> Result<BivectorDecomposition, HighDimError> {
    let n = im.dim();
    if n < 2 {
        return Err(HighDimError::Dimension { need: 2, got: n });
    }
    let m = n + 1;
    let r = im.jets(x, 2)?;
    let fr = frame_from_jets(im, x, &r)?;
    let tau = field.jets_with(&r, x, 2)?;
    let nu = normal_jets(&r, im.orientation().sign());
    let rt: Vec<Vec<Jet>> = (0..n).map(|i| jetvec::partial(&r, i)).collect();
    let tt: Vec<Vec<Jet>> = (0..n).map(|i| jetvec::partial(&tau, i)).collect();
    let g: Vec<Vec<Jet>> = (0..n)
        .map(|i| (0..n).map(|j| jetvec::dot(&rt[i], &rt[j])).collect())
        .collect();
    let ginv = inverse_order1(&g).ok_or(GeometryError::Degenerate {
        point: x.to_vec(),
        det: fr.det_g,
    })?;
    let dual: Vec<Vec<Jet>> = (0..n)
        .map(|i| {
            (0..m)
                .map(|a| {
                    let mut acc = &ginv[i][0] * &rt[0][a];
                    for j in 1..n {
                        acc = &acc + &(&ginv[i][j] * &rt[j][a]);
                    }
                    acc
                })
                .collect()
        })
        .collect();
    // Ω ν = −Σ (ν·τ_i) r^i.
    let omega_nu: Vec<Jet> = (0..m)
        .map(|a| {
            let mut acc = Jet::constant(0.0, n, 1);
            for i in 0..n {
                acc = &acc - &(&jetvec::dot(&nu, &tt[i]) * &dual[i][a]);
            }
            acc
        })
        .collect();
    let omega: Vec<Vec<Jet>> = (0..m)
        .map(|a| {
            (0..m)
                .map(|b| {
                    let mut acc = &omega_nu[a] * &nu[b];
                    for i in 0..n {
                        acc = &acc + &(&tt[i][a] * &dual[i][b]);
                    }
                    acc
                })
                .collect()
        })
        .collect();

    let mut frame: Vec<Vec<f64>> = fr.tangents.clone();
    frame.push(fr.normal.clone());
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
        .collect();
    let maps: Vec<DenseMatrix> = pairs.iter().map(|&(a, b)| basis_map(&frame, a, b)).collect();
    let design = DenseMatrix::from_fn(m * m, pairs.len(), |row, col| maps[col].data()[row]);
    let mut big_w = vec![vec![vec![0.0; m]; m]; n];
    let mut fit_residual: f64 = 0.0;
    for i in 0..n {
        let rhs: Vec<f64> = (0..m * m).map(|k| omega[k / m][k % m].d1(i)).collect();
        let c = lstsq(&design, &rhs, 1e-12)?;
        let fit = design.matvec(&c);
        fit_residual = fit_residual.max(
            fit.iter()
                .zip(&rhs)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
        for (p, &(a, b)) in pairs.iter().enumerate() {
            big_w[i][a][b] = 0.5 * c[p];
            big_w[i][b][a] = -0.5 * c[p];
        }
    }
    let sqrt_g = fr.det_g.sqrt();
    let w: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| 2.0 * big_w[i][j][n] * sqrt_g).collect())
        .collect();
    let mut tangential_residual: f64 = 0.0;
    let mut symmetry_residual: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            symmetry_residual = symmetry_residual.max((w[i][j] - w[j][i]).abs());
            for gamma in 0..n {
                tangential_residual = tangential_residual.max(big_w[i][j][gamma].abs());
            }
        }
    }
    Ok(BivectorDecomposition {
        big_w,
        w,
        tangential_residual,
        symmetry_residual,
        fit_residual,
    })
}

fn sym_index(n: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    a * n - a * (a + 1) / 2 + b
}

/// Coefficients of `h_kj w_il − h_lj w_ik − h_ki w_jl + h_li w_jk` over the
/// packed upper triangle of `w` (0-based indices).
pub fn gauss_constraint(h: &[Vec<f64>], i: usize, j: usize, k: usize, l: usize) -> Vec<f64> {
    let n = h.len();
    let mut row = vec![0.0; n * (n + 1) / 2];
    row[sym_index(n, i, l)] += h[k][j];
    row[sym_index(n, i, k)] -= h[l][j];
    row[sym_index(n, j, l)] -= h[k][i];
    row[sym_index(n, j, k)] += h[l][i];
    row
}

fn check_symmetric(h: &[Vec<f64>]) -> Result<usize, HighDimError> {
    let n = h.len();
    if h.iter().any(|r| r.len() != n) {
        return Err(HighDimError::NotSymmetric);
    }
    for i in 0..n {
        for j in 0..i {
            if h[i][j] != h[j][i] {
                return Err(HighDimError::NotSymmetric);
            }
        }
    }
    Ok(n)
}

#[derive(Clone, Debug)]
pub struct GaussNullSpace {
    pub dim: usize,
    /// Orthonormal basis vectors as symmetric matrices.
    pub basis: Vec<Vec<Vec<f64>>>,
}

/// Null space of the pointwise system over all index 4-tuples.
pub fn linearized_gauss_nullspace(h: &[Vec<f64>]) -> Result<GaussNullSpace, HighDimError> {
    let n = check_symmetric(h)?;
    if n < 3 {
        return Err(HighDimError::Dimension { need: 3, got: n });
    }
    let p = n * (n + 1) / 2;
    let mut rows = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let row = gauss_constraint(h, i, j, k, l);
                    if row.iter().any(|v| *v != 0.0) {
                        rows.push(row);
                    }
                }
            }
        }
    }
    let ns = if rows.is_empty() {
        DenseMatrix::identity(p)
    } else {
        null_space(&DenseMatrix::from_rows(&rows), 1e-10)?
    };
    let basis = (0..ns.cols())
        .map(|c| {
            let mut w = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in i..n {
                    let v = ns.get(sym_index(n, i, j), c);
                    // Packed coordinates weight off-diagonal entries once.
                    w[i][j] = v;
                    w[j][i] = v;
                }
            }
            w
        })
        .collect();
    Ok(GaussNullSpace {
        dim: ns.cols(),
        basis,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DrVerdict {
    Rigid,
    NotCertified,
}

#[derive(Clone, Debug, Serialize)]
pub struct DrReport {
    pub n: usize,
    pub rank: usize,
    pub null_dim: usize,
    /// Null-space dimension after diagonalizing `h`.
    pub null_dim_diagonal: usize,
    pub eigenvalues: Vec<f64>,
    pub verdict: DrVerdict,
}

/// Rank test and null-space test, cross-checked against each other and
/// against the diagonalized matrix.
pub fn dr_rigidity_test(h: &[Vec<f64>], rank_tol: f64) -> Result<DrReport, HighDimError> {
    let n = check_symmetric(h)?;
    if n < 3 {
        return Err(HighDimError::Dimension { need: 3, got: n });
    }
    let hm = DenseMatrix::from_rows(h);
    let sv = singular_values(&hm)?;
    let smax = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > rank_tol * smax && s > 0.0).count();
    let null_dim = linearized_gauss_nullspace(h)?.dim;
    let (eigenvalues, _) = symmetric_eigen(&hm)?;
    let diag: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j && eigenvalues[i].abs() > rank_tol * smax {
                        eigenvalues[i]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let null_dim_diagonal = linearized_gauss_nullspace(&diag)?.dim;
    if null_dim != null_dim_diagonal {
        return Err(HighDimError::Inconsistent {
            rank,
            null_dim,
            detail: format!("diagonalized system gives dimension {null_dim_diagonal}"),
        });
    }
    if (rank >= 3) != (null_dim == 0) {
        return Err(HighDimError::Inconsistent {
            rank,
            null_dim,
            detail: "rank >= 3 must hold exactly when the null space is trivial".into(),
        });
    }
    Ok(DrReport {
        n,
        rank,
        null_dim,
        null_dim_diagonal,
        eigenvalues,
        verdict: if rank >= 3 {
            DrVerdict::Rigid
        } else {
            DrVerdict::NotCertified
        },
    })
}

/// Random orthogonal `n × n` matrix from the SVD of a uniform random matrix.
pub fn random_orthogonal(rng: &mut impl Rng, n: usize) -> DenseMatrix {
    let a = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    svd(&a).expect("finite matrix").u
}

/// `Q diag(λ) Qᵀ` with `rank` eigenvalues of magnitude in `[0.5, 2]` and
/// random sign, the rest zero. The result is symmetrized exactly.
pub fn random_symmetric_with_rank(rng: &mut impl Rng, n: usize, rank: usize) -> Vec<Vec<f64>> {
    let q = random_orthogonal(rng, n);
    let lambda: Vec<f64> = (0..n)
        .map(|i| {
            if i < rank {
                let m: f64 = rng.gen_range(0.5..2.0);
                if rng.gen_bool(0.5) {
                    m
                } else {
                    -m
                }
            } else {
                0.0
            }
        })
        .collect();
    let mut h = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = (0..n).map(|k| q.get(i, k) * lambda[k] * q.get(j, k)).sum();
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    h
}
