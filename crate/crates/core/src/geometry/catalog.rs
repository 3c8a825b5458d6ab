use super::{GeometryError, Immersion, Orientation};
use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Clone, Debug, PartialEq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub syntax: &'static str,
    pub description: &'static str,
}

pub fn catalog_entries() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            name: "plane",
            syntax: "plane",
            description: "z = 0 over [-1,1]^2",
        },
        CatalogEntry {
            name: "sphere",
            syntax: "sphere(R)",
            description: "round sphere, longitude x1 periodic, latitude x2 in [-pi/2, pi/2]",
        },
        CatalogEntry {
            name: "ellipsoid",
            syntax: "ellipsoid(a,b,c)",
            description: "(a cos x1 cos x2, b sin x1 cos x2, c sin x2), same chart as sphere",
        },
        CatalogEntry {
            name: "cylinder",
            syntax: "cylinder(R)",
            description: "(R cos(x1/R), R sin(x1/R), x2), unit-speed angle, x2 in [-1,1]",
        },
        CatalogEntry {
            name: "saddle",
            syntax: "saddle",
            description: "z = x1^2 - x2^2 over [-1,1]^2",
        },
        CatalogEntry {
            name: "quartic-cap",
            syntax: "quartic-cap",
            description: "z = (1 - x^2 - y^2)^2 in polar chart, radius x1 in [1, 1.5]; boundary x1 = 1 has K = 0",
        },
    ]
}

fn args(spec: &str) -> Result<(String, Vec<f64>), GeometryError> {
    let spec = spec.trim();
    let Some(open) = spec.find('(') else {
        return Ok((spec.to_string(), vec![]));
    };
    if !spec.ends_with(')') {
        return Err(GeometryError::UnknownCatalog(spec.into()));
    }
    let name = spec[..open].trim().to_string();
    let inner = &spec[open + 1..spec.len() - 1];
    let vals = inner
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| GeometryError::UnknownCatalog(spec.into()))?;
    Ok((name, vals))
}

/// Looks up a catalog surface by `name` or `name(args)`.
pub fn catalog(spec: &str) -> Result<Immersion, GeometryError> {
    let (name, a) = args(spec)?;
    let bad = || GeometryError::UnknownCatalog(spec.to_string());
    let positive = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x > 0.0);
    let globe = vec![[0.0, 2.0 * PI], [-FRAC_PI_2, FRAC_PI_2]];
    match (name.as_str(), a.len()) {
        ("plane", 0) => Immersion::parse(
            "plane",
            &["x1", "x2", "0"],
            vec![[-1.0, 1.0], [-1.0, 1.0]],
            vec![false, false],
            Orientation::Outward,
        ),
        ("saddle", 0) => Immersion::parse(
            "saddle",
            &["x1", "x2", "x1^2 - x2^2"],
            vec![[-1.0, 1.0], [-1.0, 1.0]],
            vec![false, false],
            Orientation::Outward,
        ),
        ("sphere", 0 | 1) => {
            let r = a.first().copied().unwrap_or(1.0);
            if !positive(&[r]) {
                return Err(bad());
            }
            Immersion::parse(
                format!("sphere({r})"),
                &[
                    &format!("{r}*cos(x1)*cos(x2)"),
                    &format!("{r}*sin(x1)*cos(x2)"),
                    &format!("{r}*sin(x2)"),
                ],
                globe,
                vec![true, false],
                Orientation::Outward,
            )
        }
        ("ellipsoid", 3) => {
            if !positive(&a) {
                return Err(bad());
            }
            Immersion::parse(
                format!("ellipsoid({},{},{})", a[0], a[1], a[2]),
                &[
                    &format!("{}*cos(x1)*cos(x2)", a[0]),
                    &format!("{}*sin(x1)*cos(x2)", a[1]),
                    &format!("{}*sin(x2)", a[2]),
                ],
                globe,
                vec![true, false],
                Orientation::Outward,
            )
        }
        ("cylinder", 0 | 1) => {
            let r = a.first().copied().unwrap_or(1.0);
            if !positive(&[r]) {
                return Err(bad());
            }
            let comps = if r == 1.0 {
                ["cos(x1)".to_string(), "sin(x1)".to_string()]
            } else {
                [format!("{r}*cos(x1/{r})"), format!("{r}*sin(x1/{r})")]
            };
            Immersion::parse(
                format!("cylinder({r})"),
                &[&comps[0], &comps[1], "x2"],
                vec![[0.0, 2.0 * PI], [-1.0, 1.0]],
                vec![r == 1.0, false],
                Orientation::Outward,
            )
        }
        ("quartic-cap", 0) => Immersion::parse(
            "quartic-cap",
            &["x1*cos(x2)", "x1*sin(x2)", "(1 - x1^2)^2"],
            vec![[1.0, 1.5], [0.0, 2.0 * PI]],
            vec![false, true],
            Orientation::Outward,
        ),
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_resolves() {
        for e in catalog_entries() {
            let spec = match e.name {
                "ellipsoid" => "ellipsoid(2,1,1)".to_string(),
                other => other.to_string(),
            };
            let im = catalog(&spec).unwrap();
            assert_eq!(im.dim(), 2);
        }
        assert!(catalog("torus").is_err());
        assert!(catalog("sphere(-1)").is_err());
        assert!(catalog("ellipsoid(1,2)").is_err());
    }

    #[test]
    fn wide_cylinder_is_unit_speed() {
        let c = catalog("cylinder(2)").unwrap();
        let p = c.position(&[PI, 0.5]);
        assert!((p[0]).abs() < 1e-15 && (p[1] - 2.0).abs() < 1e-15);
    }
}
