use super::frame::{dot, norm};
use super::{GeometryError, Immersion};
use crate::linalg::{inverse, DenseMatrix};
use crate::quadrature::{gauss_legendre, rk4};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeSide {
    Lo,
    Hi,
}

/// The domain edge `x^axis = lo` or `x^axis = hi`; the other coordinate must
/// be periodic so that the edge is a closed curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub axis: usize,
    pub side: EdgeSide,
}

/// Geodesic coordinates `(s, t)` along a closed boundary curve, built by
/// shooting unit-speed geodesics orthogonally into the domain.
#[derive(Clone, Debug)]
pub struct GeodesicChart {
    pub edge: BoundaryEdge,
    pub depth: f64,
    /// Curve parameter (the periodic chart coordinate) of each s-sample.
    pub sigma: Vec<f64>,
    /// Boundary arc length at each sample.
    pub s: Vec<f64>,
    /// `ds/dσ` at each sample.
    pub speed: Vec<f64>,
    pub length: f64,
    pub t: Vec<f64>,
    /// Original chart coordinates, `[sample][step]`.
    pub chart_points: Vec<Vec<[f64; 2]>>,
    pub b: Vec<Vec<f64>>,
    pub b_t: Vec<Vec<f64>>,
    /// Second fundamental form in `(s, t)`: `L = h(∂s,∂s)`, `M = h(∂s,∂t)`, `N = h(∂t,∂t)`.
    pub l: Vec<Vec<f64>>,
    pub m: Vec<Vec<f64>>,
    pub n: Vec<Vec<f64>>,
    pub curvature: Vec<Vec<f64>>,
    /// Geodesic curvature `B_t(s, 0)` (t into the domain), times the sign flag.
    pub kg: Vec<f64>,
    pub kg_sign: f64,
    /// `max(|g_st| / B, |g_tt - 1|)` over all samples.
    pub metric_residual: f64,
}

impl GeodesicChart {
    /// Same chart with the opposite sign convention for `k_g`.
    pub fn with_flipped_kg(&self) -> GeodesicChart {
        let mut c = self.clone();
        c.kg_sign = -c.kg_sign;
        c.kg.iter_mut().for_each(|k| *k = -*k);
        c
    }

    pub fn n_s(&self) -> usize {
        self.s.len()
    }

    pub fn n_t(&self) -> usize {
        self.t.len() - 1
    }
}

struct Connection {
    gamma: [[[f64; 2]; 2]; 2],
    // d_gamma[k][i][j][m] = ∂_m Γ^k_ij
    d_gamma: [[[[f64; 2]; 2]; 2]; 2],
}

fn connection(im: &Immersion, x: &[f64]) -> Result<Connection, GeometryError> {
    let r = im.jets(x, 3)?;
    let v1 = |i: usize| -> Vec<f64> { r.iter().map(|c| c.d1(i)).collect() };
    let v2 = |i: usize, j: usize| -> Vec<f64> { r.iter().map(|c| c.d2(i, j)).collect() };
    let v3 = |i: usize, j: usize, k: usize| -> Vec<f64> { r.iter().map(|c| c.d3(i, j, k)).collect() };
    let g = DenseMatrix::from_fn(2, 2, |a, b| dot(&v1(a), &v1(b)));
    let gi = inverse(&g).ok_or(GeometryError::Degenerate {
        point: x.to_vec(),
        det: 0.0,
    })?;
    let mut dg = [[[0.0; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for m in 0..2 {
                dg[a][b][m] = dot(&v2(a, m), &v1(b)) + dot(&v1(a), &v2(b, m));
            }
        }
    }
    let mut dgi = [[[0.0; 2]; 2]; 2];
    for k in 0..2 {
        for l in 0..2 {
            for m in 0..2 {
                let mut s = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        s -= gi.get(k, a) * dg[a][b][m] * gi.get(b, l);
                    }
                }
                dgi[k][l][m] = s;
            }
        }
    }
    let mut c = Connection {
        gamma: [[[0.0; 2]; 2]; 2],
        d_gamma: [[[[0.0; 2]; 2]; 2]; 2],
    };
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let rij = v2(i, j);
                let mut gam = 0.0;
                for l in 0..2 {
                    gam += gi.get(k, l) * dot(&rij, &v1(l));
                }
                c.gamma[k][i][j] = gam;
                for m in 0..2 {
                    let rijm = v3(i, j, m);
                    let mut d = 0.0;
                    for l in 0..2 {
                        d += dgi[k][l][m] * dot(&rij, &v1(l))
                            + gi.get(k, l) * (dot(&rijm, &v1(l)) + dot(&rij, &v2(l, m)));
                    }
                    c.d_gamma[k][i][j][m] = d;
                }
            }
        }
    }
    Ok(c)
}

fn inverse_metric_and_derivative(
    im: &Immersion,
    x: &[f64],
) -> Result<(DenseMatrix, [[[f64; 2]; 2]; 2], Vec<Vec<f64>>), GeometryError> {
    let r = im.jets(x, 2)?;
    let v1 = |i: usize| -> Vec<f64> { r.iter().map(|c| c.d1(i)).collect() };
    let v2 = |i: usize, j: usize| -> Vec<f64> { r.iter().map(|c| c.d2(i, j)).collect() };
    let g = DenseMatrix::from_fn(2, 2, |a, b| dot(&v1(a), &v1(b)));
    let gi = inverse(&g).ok_or(GeometryError::Degenerate {
        point: x.to_vec(),
        det: 0.0,
    })?;
    let mut dgi = [[[0.0; 2]; 2]; 2];
    for k in 0..2 {
        for l in 0..2 {
            for m in 0..2 {
                let mut s = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        let dgab = dot(&v2(a, m), &v1(b)) + dot(&v1(a), &v2(b, m));
                        s -= gi.get(k, a) * dgab * gi.get(b, l);
                    }
                }
                dgi[k][l][m] = s;
            }
        }
    }
    Ok((gi, dgi, vec![v1(0), v1(1)]))
}

/// Shoots geodesics orthogonally from the boundary edge into the domain.
///
/// `k_g` is defined as `B_t(s, 0)` with `t` pointing into the domain; with
/// this convention the flat unit disk has `k_g = -1`.
pub fn geodesic_boundary_chart(
    im: &Immersion,
    edge: BoundaryEdge,
    depth: f64,
    n_s: usize,
    n_t: usize,
) -> Result<GeodesicChart, GeometryError> {
    if im.dim() != 2 {
        return Err(GeometryError::NeedsSurface(im.dim()));
    }
    if edge.axis > 1 {
        return Err(GeometryError::Invalid(format!("edge axis {} out of range", edge.axis)));
    }
    if !(depth > 0.0) || n_s < 3 || n_t < 2 {
        return Err(GeometryError::Invalid(
            "need depth > 0, n_s >= 3 and n_t >= 2".into(),
        ));
    }
    let a = edge.axis;
    let b = 1 - a;
    if !im.periodic()[b] {
        return Err(GeometryError::NotClosed(format!(
            "coordinate x{} along the edge is not periodic",
            b + 1
        )));
    }
    let [alo, ahi] = im.domain()[a];
    let [blo, bhi] = im.domain()[b];
    let (edge_val, inward) = match edge.side {
        EdgeSide::Lo => (alo, 1.0),
        EdgeSide::Hi => (ahi, -1.0),
    };
    let period = bhi - blo;
    let point = |sig: f64| -> Vec<f64> {
        let mut p = vec![0.0; 2];
        p[a] = edge_val;
        p[b] = sig;
        p
    };
    let speed_at = |sig: f64| -> Result<f64, GeometryError> {
        let r = im.jets(&point(sig), 1)?;
        Ok(norm(&r.iter().map(|c| c.d1(b)).collect::<Vec<_>>()))
    };

    let sigma: Vec<f64> = (0..n_s).map(|j| blo + period * j as f64 / n_s as f64).collect();
    let mut speed = Vec::with_capacity(n_s);
    for &sg in &sigma {
        speed.push(speed_at(sg)?);
    }
    let arc = |lo: f64, hi: f64| -> f64 {
        gauss_legendre(
            |u| speed_at(u).unwrap_or(f64::NAN),
            lo,
            hi,
            4,
            16,
        )
        .unwrap_or(f64::NAN)
    };
    let mut s = vec![0.0; n_s];
    for j in 1..n_s {
        s[j] = s[j - 1] + arc(sigma[j - 1], sigma[j]);
    }
    let length = s[n_s - 1] + arc(sigma[n_s - 1], blo + period);
    if !length.is_finite() {
        return Err(GeometryError::Invalid("boundary length is not finite".into()));
    }

    let h = depth / n_t as f64;
    let t: Vec<f64> = (0..=n_t).map(|k| k as f64 * h).collect();
    let mut chart = GeodesicChart {
        edge,
        depth,
        sigma: sigma.clone(),
        s,
        speed: speed.clone(),
        length,
        t: t.clone(),
        chart_points: vec![],
        b: vec![],
        b_t: vec![],
        l: vec![],
        m: vec![],
        n: vec![],
        curvature: vec![],
        kg: vec![],
        kg_sign: 1.0,
        metric_residual: 0.0,
    };

    for (j, &sg) in sigma.iter().enumerate() {
        let x0 = point(sg);
        let (gi, dgi, _) = inverse_metric_and_derivative(im, &x0)?;
        let gaa = gi.get(a, a);
        let mut v0 = [0.0; 2];
        let mut dv0 = [0.0; 2];
        let dgaa = dgi[a][a][b];
        for i in 0..2 {
            v0[i] = inward * gi.get(i, a) / gaa.sqrt();
            dv0[i] = inward
                * (dgi[i][a][b] / gaa.sqrt() - 0.5 * gi.get(i, a) * dgaa / gaa.powf(1.5))
                / speed[j];
        }
        let mut dx0 = [0.0; 2];
        dx0[b] = 1.0 / speed[j];
        let y0 = [x0[0], x0[1], v0[0], v0[1], dx0[0], dx0[1], dv0[0], dv0[1]];

        let err: std::cell::RefCell<Option<GeometryError>> = std::cell::RefCell::new(None);
        let rhs = |_t: f64, y: &[f64]| -> Vec<f64> {
            let c = match connection(im, &y[0..2]) {
                Ok(c) => c,
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    return vec![f64::NAN; 8];
                }
            };
            let (v, dx, dv) = (&y[2..4], &y[4..6], &y[6..8]);
            let mut out = vec![0.0; 8];
            out[0] = v[0];
            out[1] = v[1];
            out[4] = dv[0];
            out[5] = dv[1];
            for k in 0..2 {
                let mut acc = 0.0;
                let mut jac = 0.0;
                for i in 0..2 {
                    for jj in 0..2 {
                        acc -= c.gamma[k][i][jj] * v[i] * v[jj];
                        jac -= 2.0 * c.gamma[k][i][jj] * v[i] * dv[jj];
                        for m in 0..2 {
                            jac -= c.d_gamma[k][i][jj][m] * dx[m] * v[i] * v[jj];
                        }
                    }
                }
                out[2 + k] = acc;
                out[6 + k] = jac;
            }
            out
        };
        let traj = rk4(rhs, 0.0, &y0, h, n_t);
        if let Some(e) = err.into_inner() {
            return Err(e);
        }

        let mut pts = Vec::with_capacity(n_t + 1);
        let (mut bs, mut bts, mut ls, mut ms, mut ns, mut ks) =
            (vec![], vec![], vec![], vec![], vec![], vec![]);
        for (step, y) in traj.iter().enumerate() {
            let x = [y[0], y[1]];
            let ok_a = x[a] >= alo - 1e-12 * (ahi - alo) && x[a] <= ahi + 1e-12 * (ahi - alo);
            if !ok_a || !y.iter().all(|v| v.is_finite()) {
                return Err(GeometryError::GeodesicLeftDomain {
                    sample: j,
                    t: t[step],
                });
            }
            let r = im.jets(&x, 2)?;
            let fr = super::frame::frame_from_jets(im, &x, &r)?;
            let v = [y[2], y[3]];
            let dx = [y[4], y[5]];
            let dv = [y[6], y[7]];
            let mut jv = vec![0.0; 3];
            let mut tv = vec![0.0; 3];
            let mut jt = vec![0.0; 3];
            for c in 0..3 {
                for i in 0..2 {
                    jv[c] += fr.tangents[i][c] * dx[i];
                    tv[c] += fr.tangents[i][c] * v[i];
                    jt[c] += fr.tangents[i][c] * dv[i];
                    for k in 0..2 {
                        jt[c] += fr.second[i][k][c] * v[k] * dx[i];
                    }
                }
            }
            let bval = norm(&jv);
            if !(bval > 1e-8) {
                return Err(GeometryError::Caustic {
                    sample: j,
                    t: t[step],
                    b: bval,
                });
            }
            let hf = &fr.second_form;
            let form = |p: &[f64; 2], q: &[f64; 2]| {
                let mut s = 0.0;
                for i in 0..2 {
                    for k in 0..2 {
                        s += hf[i][k] * p[i] * q[k];
                    }
                }
                s
            };
            chart.metric_residual = chart
                .metric_residual
                .max(dot(&jv, &tv).abs() / bval)
                .max((dot(&tv, &tv) - 1.0).abs());
            pts.push(x);
            bs.push(bval);
            bts.push(dot(&jv, &jt) / bval);
            ls.push(form(&dx, &dx));
            ms.push(form(&dx, &v));
            ns.push(form(&v, &v));
            ks.push(fr.curvature);
        }
        chart.kg.push(bts[0]);
        chart.chart_points.push(pts);
        chart.b.push(bs);
        chart.b_t.push(bts);
        chart.l.push(ls);
        chart.m.push(ms);
        chart.n.push(ns);
        chart.curvature.push(ks);
    }
    Ok(chart)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{catalog, Orientation};
    use std::f64::consts::PI;

    #[test]
    fn sphere_equator_is_geodesic() {
        let s = Immersion::parse(
            "upper",
            &["cos(x1)*cos(x2)", "sin(x1)*cos(x2)", "sin(x2)"],
            vec![[0.0, 2.0 * PI], [0.0, 1.4]],
            vec![true, false],
            Orientation::Outward,
        )
        .unwrap();
        let edge = BoundaryEdge { axis: 1, side: EdgeSide::Lo };
        let c = geodesic_boundary_chart(&s, edge, 0.5, 16, 50).unwrap();
        assert!((c.length - 2.0 * PI).abs() < 1e-12);
        for j in 0..16 {
            assert!(c.kg[j].abs() < 1e-12);
            for (k, t) in c.t.iter().enumerate() {
                assert!((c.b[j][k] - t.cos()).abs() < 1e-9);
            }
        }
        assert!(c.metric_residual < 1e-6);
    }

    #[test]
    fn flat_disk_has_negative_kg() {
        let d = Immersion::parse(
            "disk",
            &["x1*cos(x2)", "x1*sin(x2)", "0"],
            vec![[0.1, 1.0], [0.0, 2.0 * PI]],
            vec![false, true],
            Orientation::Outward,
        )
        .unwrap();
        let edge = BoundaryEdge { axis: 0, side: EdgeSide::Hi };
        let c = geodesic_boundary_chart(&d, edge, 0.5, 12, 40).unwrap();
        for j in 0..12 {
            assert!((c.kg[j] + 1.0).abs() < 1e-10);
            for (k, t) in c.t.iter().enumerate() {
                assert!((c.b[j][k] - (1.0 - t)).abs() < 1e-10);
            }
        }
        let f = c.with_flipped_kg();
        assert!((f.kg[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn spherical_cap_latitude() {
        let t0: f64 = 0.6;
        let s = Immersion::parse(
            "cap",
            &["cos(x1)*cos(x2)", "sin(x1)*cos(x2)", "sin(x2)"],
            vec![[0.0, 2.0 * PI], [t0, 1.5]],
            vec![true, false],
            Orientation::Outward,
        )
        .unwrap();
        let c = geodesic_boundary_chart(&s, BoundaryEdge { axis: 1, side: EdgeSide::Lo }, 0.3, 8, 30)
            .unwrap();
        for j in 0..8 {
            assert!((c.kg[j] + t0.tan()).abs() < 1e-6);
            assert!((c.b[j][0] - 1.0).abs() < 1e-14);
            let tt = c.t[30];
            assert!((c.b[j][30] - (t0 + tt).cos() / t0.cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn leaving_domain_and_open_edges() {
        let cap = catalog("quartic-cap").unwrap();
        let edge = BoundaryEdge { axis: 0, side: EdgeSide::Lo };
        assert!(matches!(
            geodesic_boundary_chart(&cap, edge, 2.0, 8, 20),
            Err(GeometryError::GeodesicLeftDomain { .. })
        ));
        let p = catalog("plane").unwrap();
        assert!(matches!(
            geodesic_boundary_chart(&p, edge, 0.1, 8, 20),
            Err(GeometryError::NotClosed(_))
        ));
    }
}
