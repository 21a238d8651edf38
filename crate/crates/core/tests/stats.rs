mod common;

use common::*;
use dirconv::stats::{
    aggregate, k_sensitivity_sweep, sign_flip_permutation_test, sign_flip_test, GapSample,
};
use dirconv::{DistanceKind, FeatureMatrix};
use rand::seq::SliceRandom;
use rand::Rng;

fn null_gaps(seed: u64, n: usize) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| r.sample::<f64, _>(rand_distr::StandardNormal) * 0.05)
        .collect()
}

#[test]
fn false_positive_rate_is_calibrated() {
    let trials = 200;
    let rejections = (0..trials)
        .filter(|&t| sign_flip_test(&null_gaps(t, 30), 1000, t).unwrap().p_value < 0.05)
        .count();
    let rate = rejections as f64 / trials as f64;
    assert!((0.02..=0.08).contains(&rate), "false-positive rate {rate}");
}

#[test]
fn two_opposite_gaps_give_three_quarters() {
    let r = sign_flip_test(&[0.1, -0.1], 1000, 0).unwrap();
    assert!((r.p_value - 0.75).abs() <= 0.05, "p = {}", r.p_value);
    assert_eq!(r.observed_mean_gap, 0.0);
}

#[test]
fn p_value_ignores_gap_order() {
    let mut gaps = null_gaps(5, 25);
    gaps.iter_mut().for_each(|g| *g += 0.01);
    let base = sign_flip_test(&gaps, 500, 11).unwrap();
    let mut r = rng(99);
    for _ in 0..10 {
        gaps.shuffle(&mut r);
        assert_eq!(sign_flip_test(&gaps, 500, 11).unwrap(), base);
    }
}

#[test]
fn p_value_is_invariant_to_positive_scaling() {
    for seed in 0..20 {
        let mut gaps = null_gaps(seed, 15);
        gaps.iter_mut().for_each(|g| *g += 0.02);
        let base = sign_flip_test(&gaps, 400, seed).unwrap().p_value;
        for c in [2.0, 3.7, 0.01, 1e6] {
            let scaled: Vec<f64> = gaps.iter().map(|g| g * c).collect();
            assert_eq!(
                sign_flip_test(&scaled, 400, seed).unwrap().p_value,
                base,
                "seed {seed}, c {c}"
            );
        }
    }
}

#[test]
fn repeated_calls_are_bit_identical() {
    let gaps: Vec<GapSample> = null_gaps(3, 12)
        .iter()
        .enumerate()
        .map(|(i, &g)| GapSample::new(format!("a{i}"), "b", g, 10).unwrap())
        .collect();
    let a = sign_flip_permutation_test(&gaps, 1000, 42).unwrap();
    let b = sign_flip_permutation_test(&gaps, 1000, 42).unwrap();
    assert_eq!(a.p_value.to_bits(), b.p_value.to_bits());
    assert_eq!(a, b);
    assert_eq!(a.seed, 42);
    assert_eq!(a.n_permutations, 1000);
}

#[test]
fn aggregate_matches_streaming_oracle() {
    let mut r = rng(17);
    let values: Vec<f64> = (0..100).map(|_| r.random_range(-1.0..1.0)).collect();
    // Welford's update.
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, &v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let std = (m2 / 99.0).sqrt();
    let a = aggregate(&values).unwrap();
    assert_eq!(a.count, 100);
    assert!((a.mean - mean).abs() < 1e-12);
    assert!((a.std - std).abs() < 1e-12);
}

#[test]
fn k_sweep_reports_each_k() {
    let x = [FeatureMatrix::column(&APP_X).unwrap()];
    let y = [FeatureMatrix::column(&APP_Y).unwrap()];
    let sweep = k_sensitivity_sweep(&x, &y, &[1, 2, 3], DistanceKind::Euclidean).unwrap();
    assert_eq!(sweep.iter().map(|p| p.k).collect::<Vec<_>>(), vec![1, 2, 3]);
    assert_eq!(sweep[0].score.gap, 0.0);
    assert_eq!(
        (sweep[1].score.forward, sweep[1].score.backward),
        (5.0 / 6.0, 0.5)
    );
    assert!(k_sensitivity_sweep(&x, &y, &[], DistanceKind::Euclidean).is_err());
    assert!(k_sensitivity_sweep(&x, &y, &[6], DistanceKind::Euclidean).is_err());
}
