use std::ops::{Add, Mul, Neg, Sub};

/// Truncated Taylor jet of a scalar function of `dim` variables.
///
/// Stores the value and all partial derivatives up to `order` (at most 3).
/// Higher-order arrays are full tensors (row-major), symmetric by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    dim: usize,
    order: u8,
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
    third: Vec<f64>,
}

impl Jet {
    fn zeros(dim: usize, order: u8) -> Jet {
        assert!(order <= 3, "jet order is at most 3");
        let o = order as usize;
        Jet {
            dim,
            order,
            value: 0.0,
            grad: vec![0.0; if o >= 1 { dim } else { 0 }],
            hess: vec![0.0; if o >= 2 { dim * dim } else { 0 }],
            third: vec![0.0; if o >= 3 { dim * dim * dim } else { 0 }],
        }
    }

    pub fn constant(value: f64, dim: usize, order: u8) -> Jet {
        let mut j = Jet::zeros(dim, order);
        j.value = value;
        j
    }

    /// Seed jet for coordinate `i` at value `x`.
    pub fn variable(i: usize, x: f64, dim: usize, order: u8) -> Jet {
        let mut j = Jet::constant(x, dim, order);
        if order >= 1 {
            j.grad[i] = 1.0;
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn d1(&self, i: usize) -> f64 {
        self.grad[i]
    }

    pub fn d2(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.dim + j]
    }

    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        self.third[(i * self.dim + j) * self.dim + k]
    }

    /// Hessian as nested rows.
    pub fn hess(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.d2(i, j)).collect())
            .collect()
    }

    /// Third derivatives as nested arrays `[i][j][k]`.
    pub fn third(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| (0..self.dim).map(|k| self.d3(i, j, k)).collect())
                    .collect()
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|v| v.is_finite())
            && self.hess.iter().all(|v| v.is_finite())
            && self.third.iter().all(|v| v.is_finite())
    }

    /// Jet of `∂_i f`, one order lower.
    pub fn partial(&self, i: usize) -> Jet {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let n = self.dim;
        let mut out = Jet::zeros(n, self.order - 1);
        out.value = self.grad[i];
        if out.order >= 1 {
            for j in 0..n {
                out.grad[j] = self.d2(i, j);
            }
        }
        if out.order >= 2 {
            for j in 0..n {
                for k in 0..n {
                    out.hess[j * n + k] = self.d3(i, j, k);
                }
            }
        }
        out
    }

    /// Truncates to a lower order.
    pub fn truncate(&self, order: u8) -> Jet {
        let order = order.min(self.order);
        let mut out = Jet::zeros(self.dim, order);
        out.value = self.value;
        let o = order as usize;
        if o >= 1 {
            out.grad.copy_from_slice(&self.grad);
        }
        if o >= 2 {
            out.hess.copy_from_slice(&self.hess);
        }
        if o >= 3 {
            out.third.copy_from_slice(&self.third);
        }
        out
    }

    fn set2(&mut self, i: usize, j: usize, v: f64) {
        let n = self.dim;
        self.hess[i * n + j] = v;
        self.hess[j * n + i] = v;
    }

    fn set3(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let n = self.dim;
        for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
            self.third[(a * n + b) * n + c] = v;
        }
    }

    fn common(&self, other: &Jet) -> (usize, u8) {
        assert_eq!(self.dim, other.dim, "jet dimension mismatch");
        (self.dim, self.order.min(other.order))
    }

    pub fn scale(&self, c: f64) -> Jet {
        let mut out = self.clone();
        out.value *= c;
        out.grad.iter_mut().for_each(|v| *v *= c);
        out.hess.iter_mut().for_each(|v| *v *= c);
        out.third.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn add_const(&self, c: f64) -> Jet {
        let mut out = self.clone();
        out.value += c;
        out
    }

    fn lin(&self, a: f64, other: &Jet, b: f64) -> Jet {
        let (n, order) = self.common(other);
        let mut out = Jet::zeros(n, order);
        out.value = a * self.value + b * other.value;
        for (k, o) in out.grad.iter_mut().enumerate() {
            *o = a * self.grad[k] + b * other.grad[k];
        }
        for (k, o) in out.hess.iter_mut().enumerate() {
            *o = a * self.hess[k] + b * other.hess[k];
        }
        for (k, o) in out.third.iter_mut().enumerate() {
            *o = a * self.third[k] + b * other.third[k];
        }
        out
    }

    /// Leibniz product.
    pub fn mul_jet(&self, g: &Jet) -> Jet {
        let f = self;
        let (n, order) = f.common(g);
        let mut out = Jet::zeros(n, order);
        out.value = f.value * g.value;
        if order >= 1 {
            for i in 0..n {
                out.grad[i] = f.grad[i] * g.value + f.value * g.grad[i];
            }
        }
        if order >= 2 {
            for i in 0..n {
                for j in i..n {
                    let v = f.d2(i, j) * g.value
                        + f.grad[i] * g.grad[j]
                        + f.grad[j] * g.grad[i]
                        + f.value * g.d2(i, j);
                    out.set2(i, j, v);
                }
            }
        }
        if order >= 3 {
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        let v = f.d3(i, j, k) * g.value
                            + f.d2(i, j) * g.grad[k]
                            + f.d2(i, k) * g.grad[j]
                            + f.d2(j, k) * g.grad[i]
                            + f.grad[i] * g.d2(j, k)
                            + f.grad[j] * g.d2(i, k)
                            + f.grad[k] * g.d2(i, j)
                            + f.value * g.d3(i, j, k);
                        out.set3(i, j, k, v);
                    }
                }
            }
        }
        out
    }

    /// Chain rule for `φ∘f` given `[φ(f), φ'(f), φ''(f), φ'''(f)]`.
    pub fn compose(&self, d: [f64; 4]) -> Jet {
        let f = self;
        let n = f.dim;
        let order = f.order;
        let mut out = Jet::zeros(n, order);
        out.value = d[0];
        if order >= 1 {
            for i in 0..n {
                out.grad[i] = d[1] * f.grad[i];
            }
        }
        if order >= 2 {
            for i in 0..n {
                for j in i..n {
                    let v = d[2] * f.grad[i] * f.grad[j] + d[1] * f.d2(i, j);
                    out.set2(i, j, v);
                }
            }
        }
        if order >= 3 {
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        let v = d[3] * f.grad[i] * f.grad[j] * f.grad[k]
                                + d[2]
                                    * (f.d2(i, j) * f.grad[k]
                                        + f.d2(i, k) * f.grad[j]
                                        + f.d2(j, k) * f.grad[i])
                                + d[1] * f.d3(i, j, k);
                        out.set3(i, j, k, v);
                    }
                }
            }
        }
        out
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn tan(&self) -> Jet {
        let t = self.value.tan();
        let sec2 = 1.0 + t * t;
        self.compose([t, sec2, 2.0 * t * sec2, 2.0 * sec2 * (1.0 + 3.0 * t * t)])
    }

    pub fn exp(&self) -> Jet {
        let e = self.value.exp();
        self.compose([e, e, e, e])
    }

    /// Natural logarithm; caller guarantees a positive value.
    pub fn ln(&self) -> Jet {
        let x = self.value;
        self.compose([x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x)])
    }

    /// Square root; caller guarantees a non-negative value (positive when
    /// derivatives are requested).
    pub fn sqrt(&self) -> Jet {
        let x = self.value;
        let s = x.sqrt();
        self.compose([
            s,
            0.5 / s,
            -0.25 / (s * x),
            0.375 / (s * x * x),
        ])
    }

    pub fn recip(&self) -> Jet {
        let x = self.value;
        let r = 1.0 / x;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn powi(&self, k: i32) -> Jet {
        let x = self.value;
        let kf = k as f64;
        let p = |m: i32| if m == 0 { 1.0 } else { x.powi(m) };
        let d1 = if k == 0 { 0.0 } else { kf * p(k - 1) };
        let d2 = if k == 0 || k == 1 { 0.0 } else { kf * (kf - 1.0) * p(k - 2) };
        let d3 = if (0..=2).contains(&k) {
            0.0
        } else {
            kf * (kf - 1.0) * (kf - 2.0) * p(k - 3)
        };
        self.compose([p(k), d1, d2, d3])
    }

    pub fn div_jet(&self, g: &Jet) -> Jet {
        self.mul_jet(&g.recip())
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.lin(1.0, rhs, 1.0)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.lin(1.0, rhs, -1.0)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Helpers for vectors whose components are jets.
pub mod vec {
    use super::Jet;

    pub fn dot(a: &[Jet], b: &[Jet]) -> Jet {
        let mut acc = &a[0] * &b[0];
        for k in 1..a.len() {
            acc = &acc + &(&a[k] * &b[k]);
        }
        acc
    }

    pub fn dot_const(a: &[Jet], b: &[f64]) -> Jet {
        let mut acc = a[0].scale(b[0]);
        for k in 1..a.len() {
            acc = &acc + &a[k].scale(b[k]);
        }
        acc
    }

    pub fn cross(a: &[Jet], b: &[Jet]) -> Vec<Jet> {
        vec![
            &(&a[1] * &b[2]) - &(&a[2] * &b[1]),
            &(&a[2] * &b[0]) - &(&a[0] * &b[2]),
            &(&a[0] * &b[1]) - &(&a[1] * &b[0]),
        ]
    }

    pub fn add(a: &[Jet], b: &[Jet]) -> Vec<Jet> {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }

    pub fn sub(a: &[Jet], b: &[Jet]) -> Vec<Jet> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    pub fn scale(a: &[Jet], s: &Jet) -> Vec<Jet> {
        a.iter().map(|x| x * s).collect()
    }

    pub fn partial(a: &[Jet], i: usize) -> Vec<Jet> {
        a.iter().map(|x| x.partial(i)).collect()
    }

    pub fn values(a: &[Jet]) -> Vec<f64> {
        a.iter().map(|x| x.value()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_matches_leibniz_on_monomials() {
        let x = Jet::variable(0, 2.0, 2, 3);
        let y = Jet::variable(1, 3.0, 2, 3);
        let f = &(&x * &x) * &y; // x²y
        assert_eq!(f.value(), 12.0);
        assert_eq!(f.d1(0), 12.0);
        assert_eq!(f.d1(1), 4.0);
        assert_eq!(f.d2(0, 0), 6.0);
        assert_eq!(f.d2(0, 1), 4.0);
        assert_eq!(f.d3(0, 0, 1), 2.0);
        assert_eq!(f.d3(0, 1, 0), 2.0);
        assert_eq!(f.d3(0, 0, 0), 0.0);
    }

    #[test]
    fn partial_lowers_order() {
        let x = Jet::variable(0, 0.5, 1, 3);
        let s = x.sin();
        let ds = s.partial(0);
        assert_eq!(ds.order(), 2);
        assert!((ds.value() - 0.5f64.cos()).abs() < 1e-15);
        assert!((ds.d2(0, 0) + 0.5f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn powi_handles_small_exponents() {
        let x = Jet::variable(0, 3.0, 1, 3);
        let p = x.powi(2);
        assert_eq!((p.value(), p.d1(0), p.d2(0, 0), p.d3(0, 0, 0)), (9.0, 6.0, 2.0, 0.0));
        let q = x.powi(-1);
        let r = x.recip();
        assert!((q.d3(0, 0, 0) - r.d3(0, 0, 0)).abs() < 1e-15);
        let z = x.powi(0);
        assert_eq!((z.value(), z.d1(0)), (1.0, 0.0));
    }
}
