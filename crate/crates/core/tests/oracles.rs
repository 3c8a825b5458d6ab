//! Closed-form values checked through the public API.

use rigidlab_core::boundary::{
    boundary_energy_inequality, dong_conditions, reference_curve, uv_functions, BoundaryError,
    BoundaryProfile,
};
use rigidlab_core::darboux::{darboux_residual, support_at, verify_shape_identity};
use rigidlab_core::expr::{evaluate_jet, parse_expression};
use rigidlab_core::flex::{
    first_order_residual, rotation_data, w_tensor, DeformationField,
};
use rigidlab_core::geometry::{catalog, frame_at, second_form_derivatives};
use rigidlab_core::highdim::{dr_rigidity_test, linearized_gauss_nullspace, DrVerdict};
use rigidlab_core::linalg::{null_space, singular_values, DenseMatrix};
use rigidlab_core::pairs::{check_isometric, difference_tensors, verify_w_formula, IsometricPair};
use rigidlab_core::quadrature::{gauss_legendre, periodic_trapezoid};
use std::f64::consts::{PI, TAU};

#[test]
fn jets_of_a_trig_product() {
    let e = parse_expression("sin(x1)*cos(x2)", 2).unwrap();
    let j = evaluate_jet(&e, &[0.3, 0.7], 3).unwrap();
    assert!((j.d1(0) - 0.3f64.cos() * 0.7f64.cos()).abs() < 1e-15);
    assert!((j.d1(1) + 0.3f64.sin() * 0.7f64.sin()).abs() < 1e-15);
    assert!((j.d3(0, 0, 1) - 0.3f64.sin() * 0.7f64.sin()).abs() < 1e-15);
}

#[test]
fn saddle_and_sphere_curvature() {
    let s = catalog("saddle").unwrap();
    assert!((frame_at(&s, &[0.0, 0.0]).unwrap().curvature + 4.0).abs() < 1e-14);
    let sp = catalog("sphere(2)").unwrap();
    let fr = frame_at(&sp, &[1.0, 0.3]).unwrap();
    assert!((fr.curvature - 0.25).abs() < 1e-14);
    let dh = second_form_derivatives(&sp, &[1.0, 0.3]).unwrap();
    assert!(dh.iter().flatten().flatten().all(|v| v.abs() < 1e-13));
}

#[test]
fn support_function_closed_forms() {
    let c = catalog("cylinder(1)").unwrap();
    let sd = support_at(&c, &[0.8, 0.6]).unwrap();
    assert!((sd.rho - (1.0 + 0.36) / 2.0).abs() < 1e-15);
    assert!((sd.mu - 1.0).abs() < 1e-15);
    assert!((sd.hess_rho[0][0]).abs() < 1e-15 && (sd.hess_rho[1][1] - 1.0).abs() < 1e-15);
    let s = catalog("sphere(1)").unwrap();
    assert!(darboux_residual(&s, &[2.0, 0.5]).unwrap().abs() < 1e-10);
    assert!(verify_shape_identity(&s, &[2.0, 0.5]).unwrap().residual.unwrap() < 1e-14);
}

#[test]
fn cylinder_pair() {
    let p = IsometricPair::new(catalog("cylinder(1)").unwrap(), catalog("cylinder(2)").unwrap(), 1e-12)
        .unwrap();
    assert!(check_isometric(&p, &[10, 10]).unwrap() < 1e-12);
    let d = difference_tensors(&p, &[2.0, -0.5]).unwrap();
    assert!((d.w[0][0] - 0.5).abs() < 1e-10);
    assert!((d.phi - 1.5).abs() < 1e-14);
    assert!(verify_w_formula(&p, &[2.0, -0.5]).unwrap() < 1e-10);
    let e = IsometricPair::new(catalog("sphere(1)").unwrap(), catalog("ellipsoid(2,1,1)").unwrap(), 1e-10)
        .unwrap();
    assert!(check_isometric(&e, &[8, 8]).unwrap() > 0.1);
}

#[test]
fn flex_closed_forms() {
    let s = catalog("sphere(1)").unwrap();
    let x = [0.7, -0.2];
    let dil = DeformationField::parse(
        &["cos(x1)*cos(x2)", "sin(x1)*cos(x2)", "sin(x2)"],
        2,
    )
    .unwrap();
    let fo = first_order_residual(&s, &dil, &x).unwrap();
    let g = frame_at(&s, &x).unwrap().metric;
    for i in 0..2 {
        for j in 0..2 {
            assert!((fo[i][j] - 2.0 * g[i][j]).abs() < 1e-14);
        }
    }
    assert!(!rotation_data(&s, &dil, &x).unwrap().is_flex);
    let rot = DeformationField::rotation([0.2, -0.5, 1.0], [1.0, 2.0, 3.0]);
    let rd = rotation_data(&s, &rot, &x).unwrap();
    assert!((rd.y[0] - 0.2).abs() < 1e-14 && (rd.y[1] + 0.5).abs() < 1e-14 && (rd.y[2] - 1.0).abs() < 1e-14);
    let wt = w_tensor(&s, &rot, &x).unwrap();
    assert!(wt.w.iter().flatten().all(|v| v.abs() < 1e-10));
}

#[test]
fn pointwise_gauss_oracles() {
    let diag = |d: &[f64]| -> Vec<Vec<f64>> {
        (0..d.len()).map(|i| (0..d.len()).map(|j| if i == j { d[i] } else { 0.0 }).collect()).collect()
    };
    assert_eq!(linearized_gauss_nullspace(&diag(&[1.0, 2.0, 3.0])).unwrap().dim, 0);
    assert_eq!(linearized_gauss_nullspace(&diag(&[1.0, 1.0, 0.0])).unwrap().dim, 2);
    assert_eq!(dr_rigidity_test(&diag(&[5.0, -3.0, 2.0, 0.0]), 1e-10).unwrap().verdict, DrVerdict::Rigid);
    let v = [1.0, 2.0, -1.0, 0.5];
    let outer: Vec<Vec<f64>> = v.iter().map(|a| v.iter().map(|b| a * b).collect()).collect();
    let rep = dr_rigidity_test(&outer, 1e-10).unwrap();
    assert_eq!(rep.verdict, DrVerdict::NotCertified);
    assert!(rep.null_dim > 0);
    // The 3x3 system for diag(1,2,3) is nonsingular.
    let m = DenseMatrix::from_rows(&[vec![2.0, 1.0, 0.0], vec![3.0, 0.0, 1.0], vec![0.0, 3.0, 2.0]]);
    assert!((rigidlab_core::linalg::det(&m) + 12.0).abs() < 1e-12);
}

#[test]
fn boundary_oracles() {
    let unit = BoundaryProfile::from_theta_expression("1").unwrap();
    let f = |t: f64| (2.0 * t).sin();
    let e = boundary_energy_inequality(&unit, &f).unwrap();
    assert!((e.value() + PI / 3.0).abs() < 1e-8);
    assert!(e.agreement() < 1e-6);
    assert!(uv_functions(&unit, &f, 16).unwrap().c.abs() < 1e-13);
    assert!((reference_curve(&unit, 16).unwrap().area - PI).abs() < 1e-10);
    let c = |_: f64| 2.0;
    assert!(matches!(
        uv_functions(&unit, &c, 16),
        Err(BoundaryError::Inadmissible { .. })
    ));
    let circle = BoundaryProfile::from_arc_expression("1", TAU).unwrap();
    let d = dong_conditions(&circle);
    assert!(d.turning_residual < 1e-12 && d.closure_residual < 1e-12);
}

#[test]
fn harness_oracles() {
    let sv = singular_values(&DenseMatrix::identity(3)).unwrap();
    assert_eq!(sv, vec![1.0, 1.0, 1.0]);
    let ones = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
    let sv = singular_values(&ones).unwrap();
    assert!((sv[0] - 2.0).abs() < 1e-15 && sv[1].abs() < 1e-15);
    assert_eq!(null_space(&ones, 1e-8).unwrap().cols(), 1);
    let s: Vec<f64> = (0..64).map(|j| (TAU * j as f64 / 64.0).sin().powi(2)).collect();
    assert!((periodic_trapezoid(&s, TAU).unwrap() - PI).abs() < 1e-12);
    let q = gauss_legendre(|t| t.sin().powi(4) * t.cos().powi(2), 0.0, TAU, 16, 8).unwrap();
    assert!((q - PI / 8.0).abs() < 1e-10);
    assert!((gauss_legendre(|x| x.powi(3), 0.0, 1.0, 1, 2).unwrap() - 0.25).abs() < 1e-15);
}
