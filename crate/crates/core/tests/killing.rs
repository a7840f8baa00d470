mod common;

use common::*;
use hkmetric::curvature::{killing_scan, CurvatureError};

#[test]
fn two_mode_has_no_translational_symmetry() {
    let k = killing_scan(&two_mode(), 0.0, &points(300, 1, 1.0)).unwrap();
    assert_eq!(k.rank, 4);
    assert!(k.null_directions.is_empty());
}

#[test]
fn one_mode_with_both_branches_has_one_symmetry() {
    let pot = one_mode(c(2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), 0.0);
    let k = killing_scan(&pot, 0.0, &points(300, 2, 1.0)).unwrap();
    assert_eq!(k.rank, 3);
    assert_eq!(k.null_directions.len(), 1);
}

#[test]
fn one_mode_f_only_has_no_metric() {
    let pot = one_mode(c(2.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), 0.0);
    assert!(matches!(killing_scan(&pot, 0.0, &points(300, 3, 1.0)), Err(CurvatureError::TooFewPoints { found: 0, .. })));
}

#[test]
fn x4_independent_potential_recovers_e4() {
    let k = killing_scan(&x4_independent(), 0.0, &points(300, 4, 1.0)).unwrap();
    assert_eq!(k.rank, 3);
    let n = k.null_directions[0];
    assert!((n[3].abs() - 1.0).abs() < 1e-10, "{n:?}");
}
