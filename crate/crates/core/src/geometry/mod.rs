//! Immersions, pointwise frames, curvature and geodesic boundary charts.

mod catalog;
mod frame;
mod geodesic;

pub use catalog::{catalog, catalog_entries, CatalogEntry};
pub use frame::{
    brioschi_curvature, codazzi_residual, covariant_hessian, frame_at, generalized_cross,
    normal_jets, second_form_derivatives, PointFrame,
};
pub use geodesic::{geodesic_boundary_chart, BoundaryEdge, EdgeSide, GeodesicChart};
pub(crate) use frame::{covariant_hessian_of, frame_from_jets};

use crate::expr::{evaluate_jet, parse_expression, EvalError, Expr, Jet, ParseError};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid immersion: {0}")]
    Invalid(String),
    #[error("component {component}: {source}")]
    Parse {
        component: usize,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("degenerate tangents at {point:?}: Gram determinant {det:e}")]
    Degenerate { point: Vec<f64>, det: f64 },
    #[error("point {point:?} outside the domain")]
    OutsideDomain { point: Vec<f64> },
    #[error("operation needs a surface (n = 2), got n = {0}")]
    NeedsSurface(usize),
    #[error("geodesic left the domain at s-sample {sample}, t = {t}")]
    GeodesicLeftDomain { sample: usize, t: f64 },
    #[error("caustic at s-sample {sample}, t = {t} (B = {b:e})")]
    Caustic { sample: usize, t: f64, b: f64 },
    #[error("boundary edge is not a closed curve: {0}")]
    NotClosed(String),
    #[error("unknown catalog surface '{0}'")]
    UnknownCatalog(String),
    #[error("surface file: {0}")]
    File(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Normal along the generalized cross product of `r_1, …, r_n`.
    Outward,
    Inward,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Outward => 1.0,
            Orientation::Inward => -1.0,
        }
    }

    pub fn flipped(self) -> Orientation {
        match self {
            Orientation::Outward => Orientation::Inward,
            Orientation::Inward => Orientation::Outward,
        }
    }
}

/// On-disk surface description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceFile {
    pub name: String,
    pub dim: usize,
    pub components: Vec<String>,
    pub domain: Vec<[f64; 2]>,
    pub periodic: Vec<bool>,
    pub orientation: Orientation,
}

/// Parametrized hypersurface `r: [lo, hi]^n -> R^{n+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Immersion {
    pub name: String,
    dim: usize,
    components: Vec<Expr>,
    domain: Vec<[f64; 2]>,
    periodic: Vec<bool>,
    orientation: Orientation,
}

impl Immersion {
    pub fn new(
        name: impl Into<String>,
        components: Vec<Expr>,
        domain: Vec<[f64; 2]>,
        periodic: Vec<bool>,
        orientation: Orientation,
    ) -> Result<Immersion, GeometryError> {
        let dim = domain.len();
        if dim == 0 {
            return Err(GeometryError::Invalid("chart dimension must be positive".into()));
        }
        if components.len() != dim + 1 {
            return Err(GeometryError::Invalid(format!(
                "expected {} components for a {}-dimensional chart, got {}",
                dim + 1,
                dim,
                components.len()
            )));
        }
        if periodic.len() != dim {
            return Err(GeometryError::Invalid("periodic flags must match dim".into()));
        }
        for (i, [lo, hi]) in domain.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(GeometryError::Invalid(format!(
                    "domain interval {} must satisfy lo < hi",
                    i + 1
                )));
            }
        }
        if let Some(c) = components.iter().find(|c| c.arity() > dim) {
            return Err(GeometryError::Invalid(format!(
                "component {c} uses a variable beyond x{dim}"
            )));
        }
        Ok(Immersion {
            name: name.into(),
            dim,
            components,
            domain,
            periodic,
            orientation,
        })
    }

    pub fn parse(
        name: impl Into<String>,
        components: &[&str],
        domain: Vec<[f64; 2]>,
        periodic: Vec<bool>,
        orientation: Orientation,
    ) -> Result<Immersion, GeometryError> {
        let dim = domain.len();
        let comps = components
            .iter()
            .enumerate()
            .map(|(k, s)| {
                parse_expression(s, dim).map_err(|source| GeometryError::Parse {
                    component: k,
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Immersion::new(name, comps, domain, periodic, orientation)
    }

    pub fn from_file(file: &SurfaceFile) -> Result<Immersion, GeometryError> {
        if file.domain.len() != file.dim {
            return Err(GeometryError::Invalid(format!(
                "dim {} but {} domain intervals",
                file.dim,
                file.domain.len()
            )));
        }
        let comps: Vec<&str> = file.components.iter().map(String::as_str).collect();
        Immersion::parse(
            file.name.clone(),
            &comps,
            file.domain.clone(),
            file.periodic.clone(),
            file.orientation,
        )
    }

    pub fn from_json(text: &str) -> Result<Immersion, GeometryError> {
        let file: SurfaceFile =
            serde_json::from_str(text).map_err(|e| GeometryError::File(e.to_string()))?;
        Immersion::from_file(&file)
    }

    pub fn load(path: &Path) -> Result<Immersion, GeometryError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GeometryError::File(format!("{}: {e}", path.display())))?;
        Immersion::from_json(&text)
    }

    pub fn to_file(&self) -> SurfaceFile {
        SurfaceFile {
            name: self.name.clone(),
            dim: self.dim,
            components: self.components.iter().map(|c| c.to_string()).collect(),
            domain: self.domain.clone(),
            periodic: self.periodic.clone(),
            orientation: self.orientation,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim + 1
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn domain(&self) -> &[[f64; 2]] {
        &self.domain
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn with_orientation(&self, orientation: Orientation) -> Immersion {
        Immersion {
            orientation,
            ..self.clone()
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim
            && x.iter().zip(&self.domain).zip(&self.periodic).all(|((v, [lo, hi]), p)| {
                *p || (*v >= lo - 1e-12 * (hi - lo) && *v <= hi + 1e-12 * (hi - lo))
            })
    }

    /// `x -> A x + b` applied to the image, `A` given by rows.
    pub fn rigid_transform(&self, a: &[Vec<f64>], b: &[f64]) -> Immersion {
        let m = self.ambient_dim();
        let comps = (0..m)
            .map(|i| {
                let mut e = Expr::num(b[i]);
                for j in 0..m {
                    if a[i][j] != 0.0 {
                        e = Expr::add(e, Expr::mul(Expr::num(a[i][j]), self.components[j].clone()));
                    }
                }
                e
            })
            .collect();
        Immersion {
            components: comps,
            name: format!("{}-moved", self.name),
            ..self.clone()
        }
    }

    pub fn translate(&self, b: &[f64]) -> Immersion {
        let m = self.ambient_dim();
        let id: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        self.rigid_transform(&id, b)
    }

    /// Component jets of the position vector.
    pub fn jets(&self, x: &[f64], order: u8) -> Result<Vec<Jet>, GeometryError> {
        if x.len() != self.dim {
            return Err(GeometryError::Invalid(format!(
                "point has {} coordinates, chart has {}",
                x.len(),
                self.dim
            )));
        }
        self.components
            .iter()
            .map(|c| evaluate_jet(c, x, order).map_err(GeometryError::from))
            .collect()
    }

    pub fn position(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    /// Uniform random point with a relative `margin` away from
    /// non-periodic edges.
    pub fn sample_interior(&self, rng: &mut impl Rng, margin: f64) -> Vec<f64> {
        self.domain
            .iter()
            .zip(&self.periodic)
            .map(|([lo, hi], p)| {
                let m = if *p { 0.0 } else { margin * (hi - lo) };
                rng.gen_range(lo + m..=hi - m)
            })
            .collect()
    }

    /// Tensor grid of chart points; `counts[i]` nodes per direction. Periodic
    /// directions omit the duplicated endpoint, others include both ends.
    pub fn grid_axes(&self, counts: &[usize]) -> Vec<Vec<f64>> {
        self.domain
            .iter()
            .zip(&self.periodic)
            .zip(counts)
            .map(|(([lo, hi], p), &n)| {
                if *p {
                    (0..n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
                } else if n == 1 {
                    vec![0.5 * (lo + hi)]
                } else {
                    (0..n)
                        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
                        .collect()
                }
            })
            .collect()
    }

    /// Interior tensor grid: cell midpoints in non-periodic directions.
    pub fn interior_grid(&self, counts: &[usize]) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .domain
            .iter()
            .zip(&self.periodic)
            .zip(counts)
            .map(|(([lo, hi], p), &n)| {
                if *p {
                    (0..n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
                } else {
                    (0..n)
                        .map(|k| lo + (hi - lo) * (k as f64 + 0.5) / n as f64)
                        .collect()
                }
            })
            .collect();
        tensor_points(&axes)
    }
}

/// All points of a tensor grid, first axis varying slowest.
pub fn tensor_points(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![]];
    for axis in axes {
        let mut next = Vec::with_capacity(pts.len() * axis.len());
        for p in &pts {
            for &v in axis {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        pts = next;
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surface_file_round_trip() {
        let s = catalog("sphere(2)").unwrap();
        let json = serde_json::to_string(&s.to_file()).unwrap();
        let back = Immersion::from_json(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn validates_components() {
        let err = Immersion::parse(
            "bad",
            &["x1", "x2"],
            vec![[0.0, 1.0], [0.0, 1.0]],
            vec![false, false],
            Orientation::Outward,
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::Invalid(_)));
        let err = Immersion::parse(
            "bad",
            &["x1", "x2", "x3"],
            vec![[0.0, 1.0], [0.0, 1.0]],
            vec![false, false],
            Orientation::Outward,
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::Parse { component: 2, .. }));
    }

    #[test]
    fn grid_conventions() {
        let s = catalog("sphere(1)").unwrap();
        let axes = s.grid_axes(&[4, 3]);
        assert_eq!(axes[0].len(), 4);
        assert!((axes[0][3] - 1.5 * std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(axes[1], vec![-std::f64::consts::FRAC_PI_2, 0.0, std::f64::consts::FRAC_PI_2]);
        assert_eq!(tensor_points(&axes).len(), 12);
    }

    #[test]
    fn rigid_transform_moves_points() {
        let s = catalog("sphere(1)").unwrap();
        let rot = vec![vec![0.0, -1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]];
        let m = s.rigid_transform(&rot, &[0.0, 0.0, 2.0]);
        let p = m.position(&[0.0, 0.0]);
        assert!((p[0]).abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15 && (p[2] - 2.0).abs() < 1e-15);
    }
}
