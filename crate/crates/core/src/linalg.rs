//! Dense linear algebra on a small row-major matrix type, backed by `faer`.

use faer::{c64, Mat, Side};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("decomposition did not converge")]
    NoConvergence,
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Row-major dense real matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must equal rows*cols");
        DenseMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        DenseMatrix { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DenseMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec shape mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn to_faer(&self) -> Mat<f64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }

    fn from_faer(m: faer::MatRef<'_, f64>) -> DenseMatrix {
        DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub u: DenseMatrix,
    /// Non-negative, sorted descending.
    pub singular_values: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> DenseMatrix {
        let k = self.singular_values.len();
        let us = DenseMatrix::from_fn(self.u.rows(), k, |i, j| {
            self.u.get(i, j) * self.singular_values[j]
        });
        us.matmul(&self.v.transpose())
    }

    /// Number of singular values at most `rel_tol * σ_max`, counting the
    /// `cols - rows` implicit zeros of a wide matrix.
    pub fn null_dim(&self, rel_tol: f64) -> usize {
        let cols = self.v.rows();
        let smax = self.singular_values.first().copied().unwrap_or(0.0);
        let small = self
            .singular_values
            .iter()
            .filter(|&&s| s <= rel_tol * smax)
            .count();
        small + cols.saturating_sub(self.singular_values.len())
    }
}

pub fn svd(a: &DenseMatrix) -> Result<SvdResult, LinalgError> {
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if a.rows == 0 || a.cols == 0 {
        return Ok(SvdResult {
            u: DenseMatrix::zeros(a.rows, 0),
            singular_values: vec![],
            v: DenseMatrix::zeros(a.cols, 0),
        });
    }
    let m = a.to_faer();
    let s = m.thin_svd().map_err(|_| LinalgError::NoConvergence)?;
    let sv: Vec<f64> = s.S().column_vector().iter().copied().collect();
    Ok(SvdResult {
        u: DenseMatrix::from_faer(s.U()),
        singular_values: sv,
        v: DenseMatrix::from_faer(s.V()),
    })
}

/// Singular values only, sorted descending.
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>, LinalgError> {
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if a.rows == 0 || a.cols == 0 {
        return Ok(vec![]);
    }
    a.to_faer()
        .singular_values()
        .map_err(|_| LinalgError::NoConvergence)
}

/// Singular values of a complex matrix given in row-major order.
pub fn complex_singular_values(
    rows: usize,
    cols: usize,
    data: &[c64],
) -> Result<Vec<f64>, LinalgError> {
    if data.len() != rows * cols {
        return Err(LinalgError::Shape("complex data length".into()));
    }
    if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    if rows == 0 || cols == 0 {
        return Ok(vec![]);
    }
    let m = Mat::<c64>::from_fn(rows, cols, |i, j| data[i * cols + j]);
    m.singular_values().map_err(|_| LinalgError::NoConvergence)
}

/// Orthonormal basis of the null space (columns), using a relative threshold
/// on the singular values.
pub fn null_space(a: &DenseMatrix, rel_tol: f64) -> Result<DenseMatrix, LinalgError> {
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = a.cols;
    if a.rows == 0 {
        return Ok(DenseMatrix::identity(n));
    }
    let s = a.to_faer().svd().map_err(|_| LinalgError::NoConvergence)?;
    let sv: Vec<f64> = s.S().column_vector().iter().copied().collect();
    let smax = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&x| x > rel_tol * smax && x > 0.0).count();
    let v = s.V();
    Ok(DenseMatrix::from_fn(n, n - rank, |i, j| v[(i, rank + j)]))
}

/// Numerical rank with a relative threshold.
pub fn rank(a: &DenseMatrix, rel_tol: f64) -> Result<usize, LinalgError> {
    let sv = singular_values(a)?;
    let smax = sv.first().copied().unwrap_or(0.0);
    Ok(sv.iter().filter(|&&x| x > rel_tol * smax && x > 0.0).count())
}

/// Eigen-decomposition of a symmetric matrix; eigenvalues ascending, the
/// eigenvectors are the columns of the returned matrix.
pub fn symmetric_eigen(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix), LinalgError> {
    if a.rows != a.cols {
        return Err(LinalgError::Shape("symmetric_eigen needs a square matrix".into()));
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let e = a
        .to_faer()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| LinalgError::NoConvergence)?;
    let vals: Vec<f64> = e.S().column_vector().iter().copied().collect();
    Ok((vals, DenseMatrix::from_faer(e.U())))
}

/// Minimum-norm least-squares solution of `A x = b` via the SVD.
pub fn lstsq(a: &DenseMatrix, b: &[f64], rel_tol: f64) -> Result<Vec<f64>, LinalgError> {
    if b.len() != a.rows {
        return Err(LinalgError::Shape("rhs length".into()));
    }
    let s = svd(a)?;
    let smax = s.singular_values.first().copied().unwrap_or(0.0);
    let mut x = vec![0.0; a.cols];
    for (k, &sk) in s.singular_values.iter().enumerate() {
        if sk <= rel_tol * smax || sk == 0.0 {
            continue;
        }
        let c: f64 = (0..a.rows).map(|i| s.u.get(i, k) * b[i]).sum::<f64>() / sk;
        for (j, xj) in x.iter_mut().enumerate() {
            *xj += c * s.v.get(j, k);
        }
    }
    Ok(x)
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(a: &DenseMatrix) -> f64 {
    assert_eq!(a.rows, a.cols, "det needs a square matrix");
    let n = a.rows;
    let mut m = a.data.clone();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[i * n + c].abs().total_cmp(&m[j * n + c].abs()))
            .unwrap();
        if m[p * n + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for j in 0..n {
                m.swap(c * n + j, p * n + j);
            }
            d = -d;
        }
        let piv = m[c * n + c];
        d *= piv;
        for i in c + 1..n {
            let f = m[i * n + c] / piv;
            for j in c..n {
                m[i * n + j] -= f * m[c * n + j];
            }
        }
    }
    d
}

/// Inverse of a small square matrix (Gauss–Jordan); `None` if singular.
pub fn inverse(a: &DenseMatrix) -> Option<DenseMatrix> {
    assert_eq!(a.rows, a.cols, "inverse needs a square matrix");
    let n = a.rows;
    let mut m = a.data.clone();
    let mut inv = DenseMatrix::identity(n).data;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i * n + c].abs().total_cmp(&m[j * n + c].abs()))?;
        if m[p * n + c] == 0.0 {
            return None;
        }
        for j in 0..n {
            m.swap(c * n + j, p * n + j);
            inv.swap(c * n + j, p * n + j);
        }
        let piv = m[c * n + c];
        for j in 0..n {
            m[c * n + j] /= piv;
            inv[c * n + j] /= piv;
        }
        for i in 0..n {
            if i == c {
                continue;
            }
            let f = m[i * n + c];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                m[i * n + j] -= f * m[c * n + j];
                inv[i * n + j] -= f * inv[c * n + j];
            }
        }
    }
    Some(DenseMatrix::from_row_major(n, n, inv))
}

/// Pairwise (cascade) summation; deterministic for a fixed input order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_has_unit_singular_values() {
        let s = singular_values(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(s.len(), 3);
        for v in s {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rank_one_two_by_two() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let s = svd(&a).unwrap();
        assert!((s.singular_values[0] - 2.0).abs() < 1e-14);
        assert!(s.singular_values[1].abs() < 1e-14);
        assert_eq!(s.null_dim(1e-8), 1);
        let ns = null_space(&a, 1e-8).unwrap();
        assert_eq!(ns.cols(), 1);
        assert!((ns.get(0, 0) + ns.get(1, 0)).abs() < 1e-14);
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = DenseMatrix::from_fn(50, 30, |_, _| rng.gen_range(-1.0..1.0));
        let s = svd(&a).unwrap();
        let r = s.reconstruct();
        let mut diff = r.clone();
        for i in 0..50 {
            for j in 0..30 {
                diff.set(i, j, r.get(i, j) - a.get(i, j));
            }
        }
        assert!(diff.frobenius_norm() <= 1e-12 * a.frobenius_norm());
        assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        assert!(s.singular_values.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn wide_matrix_counts_implicit_zeros() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0, 0.0]]);
        assert_eq!(svd(&a).unwrap().null_dim(1e-8), 2);
        assert_eq!(null_space(&a, 1e-8).unwrap().cols(), 2);
    }

    #[test]
    fn rejects_non_finite() {
        let a = DenseMatrix::from_rows(&[vec![f64::NAN]]);
        assert_eq!(svd(&a).unwrap_err(), LinalgError::NonFinite);
    }

    #[test]
    fn eigen_det_inverse() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let (vals, vecs) = symmetric_eigen(&a).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        assert!((vecs.get(0, 1).abs() - vecs.get(1, 1).abs()).abs() < 1e-14);
        assert!((det(&a) - 3.0).abs() < 1e-14);
        let inv = inverse(&a).unwrap();
        let p = a.matmul(&inv);
        assert!((p.get(0, 0) - 1.0).abs() < 1e-15 && p.get(0, 1).abs() < 1e-15);
        let x = lstsq(&a, &[3.0, 3.0], 1e-12).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn complex_block_singular_values() {
        // diag(i, 2) has singular values (2, 1)
        let z = c64::new(0.0, 0.0);
        let d = [c64::new(0.0, 1.0), z, z, c64::new(2.0, 0.0)];
        let s = complex_singular_values(2, 2, &d).unwrap();
        assert!((s[0] - 2.0).abs() < 1e-15 && (s[1] - 1.0).abs() < 1e-15);
    }
}
