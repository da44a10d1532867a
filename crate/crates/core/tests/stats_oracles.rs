mod common;

use common::{brute_force_ks, ks_p_value_reference, rng};
use proptest::prelude::*;
use rand::Rng;
use zonescan_core::model::{Activation, MlpModel};
use zonescan_core::{find_disagreements, ks_two_sample, make_blobs, train, TrainConfig};

#[test]
fn fixed_pair_matches_brute_force() {
    let a = [0.1, 0.2, 0.3, 0.4];
    let b = [0.35, 0.45, 0.55, 0.65];
    let r = ks_two_sample(&a, &b).unwrap();
    let d = brute_force_ks(&a, &b);
    assert_eq!(d, 0.75);
    assert_eq!(r.statistic, d);
    assert!((r.p_value - ks_p_value_reference(d, 4, 4)).abs() < 1e-10);
}

#[test]
fn random_small_samples_match_brute_force() {
    let mut g = rng(33);
    for _ in 0..1000 {
        let n1 = g.random_range(1..15);
        let n2 = g.random_range(1..15);
        // Coarse grid so ties are common.
        let a: Vec<f64> = (0..n1).map(|_| g.random_range(0..8) as f64 / 8.0).collect();
        let b: Vec<f64> = (0..n2).map(|_| g.random_range(0..10) as f64 / 9.0).collect();
        let r = ks_two_sample(&a, &b).unwrap();
        let d = brute_force_ks(&a, &b);
        assert!((r.statistic - d).abs() < 1e-12, "{a:?} {b:?}");
        assert!((r.p_value - ks_p_value_reference(r.statistic, n1, n2)).abs() < 1e-10);
    }
}

#[test]
fn null_rejection_rate_is_calibrated() {
    let mut g = rng(4242);
    let trials = 1000;
    let rejected = (0..trials)
        .filter(|_| {
            let a: Vec<f64> = (0..100).map(|_| g.random::<f64>()).collect();
            let b: Vec<f64> = (0..100).map(|_| g.random::<f64>()).collect();
            ks_two_sample(&a, &b).unwrap().p_value < 0.05
        })
        .count();
    let rate = rejected as f64 / trials as f64;
    assert!((0.03..=0.08).contains(&rate), "rejection rate {rate}");
}

#[test]
fn clearly_shifted_samples_reject() {
    let mut g = rng(1);
    let a: Vec<f64> = (0..500).map(|_| g.random::<f64>()).collect();
    let b: Vec<f64> = (0..500).map(|_| g.random::<f64>() * 0.6 + 0.4).collect();
    assert!(ks_two_sample(&a, &b).unwrap().p_value < 1e-3);
}

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 1..40)
}

proptest! {
    #[test]
    fn statistic_is_symmetric(a in sample(), b in sample()) {
        prop_assert_eq!(ks_two_sample(&a, &b).unwrap().statistic, ks_two_sample(&b, &a).unwrap().statistic);
    }

    #[test]
    fn statistic_invariant_under_increasing_affine_maps(a in sample(), b in sample(), slope in 0.1f64..10.0, shift in -3.0f64..3.0) {
        let f = |v: &Vec<f64>| v.iter().map(|x| slope * x + shift).collect::<Vec<_>>();
        let before = ks_two_sample(&a, &b).unwrap().statistic;
        let after = ks_two_sample(&f(&a), &f(&b)).unwrap().statistic;
        // Ties can only be created by rounding, never removed.
        prop_assert!((before - after).abs() < 1e-12 || brute_force_ks(&f(&a), &f(&b)) == after);
    }

    #[test]
    fn statistic_lives_on_its_lattice(a in sample(), b in sample()) {
        let r = ks_two_sample(&a, &b).unwrap();
        let floor = 1.0 / a.len().max(b.len()) as f64;
        prop_assert!(r.statistic == 0.0 || (r.statistic >= floor - 1e-12 && r.statistic <= 1.0));
        prop_assert!((0.0..=1.0).contains(&r.p_value));
    }
}

#[test]
fn independently_trained_models_disagree_near_the_boundary() {
    // Two classes split by the vertical line x0 = 0.5.
    let centers = [[0.35, 0.5], [0.65, 0.5]];
    let train_set = make_blobs(2000, &centers, 0.1, 1).unwrap();
    let test_set = make_blobs(4000, &centers, 0.1, 2).unwrap();
    let models: Vec<_> = [3u64, 4]
        .iter()
        .map(|&s| {
            let m = MlpModel::<f64>::init(&[2, 16, 2], Activation::Tanh, s).unwrap();
            let cfg = TrainConfig { learning_rate: 0.1, epochs: 10, batch_size: 32, seed: s };
            train(&m, &train_set, &cfg).unwrap().model
        })
        .collect();
    let corners = find_disagreements(&models, &test_set).unwrap();
    assert!(!corners.is_empty());
    let distance = |i: usize| (test_set.input(i)[0] - 0.5).abs();
    let corner_mean = corners.iter().map(|&i| distance(i)).sum::<f64>() / corners.len() as f64;
    let all_mean = (0..test_set.len()).map(distance).sum::<f64>() / test_set.len() as f64;
    println!("{} corner cases, mean distance {corner_mean:.4} vs {all_mean:.4}", corners.len());
    assert!(corner_mean < all_mean / 2.0);
    assert!(corners.iter().all(|&i| distance(i) < 0.15));
}
