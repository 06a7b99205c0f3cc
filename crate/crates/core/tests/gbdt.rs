mod common;

use common::checks;
use piostack::stacker::{fit_gbdt, fit_label, BinMapper, GbdtConfig, StackError};

#[test]
fn gbdt_criterion() {
    checks::gbdt_correctness().unwrap();
}

#[test]
fn few_distinct_values_bin_exactly() {
    let values = [3.0, 1.0, 2.0, 1.0, 3.0];
    let m = BinMapper::fit(&values, 255);
    assert_eq!(m.n_bins(), 3);
    assert_eq!([m.bin(1.0), m.bin(2.0), m.bin(3.0)], [0, 1, 2]);
    // unseen values fall on the side of the nearest midpoint
    assert_eq!(
        [m.bin(0.0), m.bin(1.4), m.bin(1.6), m.bin(9.0)],
        [0, 0, 1, 2]
    );
}

#[test]
fn many_values_respect_max_bins() {
    let values: Vec<f64> = (0..10_000).map(|k| (k as f64).sqrt()).collect();
    let m = BinMapper::fit(&values, 16);
    assert!(m.n_bins() <= 16);
    let bins: Vec<u16> = values.iter().map(|&v| m.bin(v)).collect();
    assert!(bins.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn fitting_is_deterministic() {
    let (x, y) = checks::random_fixture(5);
    let cfg = GbdtConfig::default();
    let a = fit_label(&x, &y, &cfg).unwrap();
    let b = fit_label(&x, &y, &cfg).unwrap();
    assert_eq!(a.booster, b.booster);
    assert_eq!(a.loss_trajectory, b.loss_trajectory);
}

#[test]
fn trees_respect_shape_limits() {
    let (x, y) = checks::random_fixture(6);
    let cfg = GbdtConfig {
        max_depth: 2,
        max_leaves: 3,
        ..GbdtConfig::default()
    };
    let out = fit_label(&x, &y, &cfg).unwrap();
    assert!(!out.booster.trees.is_empty());
    for t in &out.booster.trees {
        assert!(t.depth() <= 2 && t.n_leaves() <= 3);
    }
}

#[test]
fn base_score_is_log_odds() {
    let x: Vec<Vec<f64>> = (0..10).map(|k| vec![k as f64]).collect();
    let y: Vec<bool> = (0..10).map(|k| k < 3).collect();
    let out = fit_label(&x, &y, &GbdtConfig::default()).unwrap();
    assert!((out.booster.base_score - (3.0f64 / 7.0).ln()).abs() < 1e-12);
}

#[test]
fn bad_input_is_rejected() {
    let x = vec![vec![0.0], vec![f64::NAN]];
    assert!(matches!(
        fit_label(&x, &[true, false], &GbdtConfig::default()),
        Err(StackError::NonFinite { row: 1, col: 0 })
    ));
    let x = vec![vec![0.0], vec![1.0]];
    assert!(matches!(
        fit_label(&x, &[true, true], &GbdtConfig::default()),
        Err(StackError::SingleClass { .. })
    ));
    let bad = GbdtConfig {
        max_bins: 1,
        ..GbdtConfig::default()
    };
    assert!(matches!(
        fit_gbdt(&x, &[[1.0; 3], [0.0; 3]], &bad),
        Err(StackError::Config(_))
    ));
}
