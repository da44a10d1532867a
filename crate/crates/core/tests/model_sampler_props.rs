mod common;

use common::{chi_square_uniform, random_input, random_model, rng};
use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use zonescan_core::model::{model_from_json, model_to_json, Activation, DenseLayer, MlpModel};
use zonescan_core::{make_region, SeededStream};

#[test]
fn outputs_stay_on_simplex() {
    let mut g = rng(17);
    for _ in 0..1000 {
        let depth = g.random_range(0..3);
        let m = random_model(&mut g, depth);
        let x = random_input(&mut g, m.input_dim());
        let p = m.forward(&x).unwrap();
        assert!((p.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p.values().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(p, m.forward(&x).unwrap());
    }
}

#[test]
fn huge_logits_stay_finite() {
    let layer = DenseLayer::new(
        vec![vec![1e4, 0.0], vec![0.0, -1e4], vec![5e3, 5e3]],
        vec![0.0; 3],
        Activation::Identity,
    )
    .unwrap();
    let m: MlpModel<f64> = MlpModel::new(vec![layer]).unwrap();
    for x in [[1.0, 1.0], [0.0, 1.0], [1.0, 0.0], [0.5, 0.5]] {
        let p = m.forward(&x).unwrap();
        assert!(p.values().iter().all(|v| v.is_finite()));
        assert!((p.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn samples_never_leave_the_zone() {
    let mut g = rng(5);
    let mut violations = 0;
    for trial in 0..1000u64 {
        let d = g.random_range(1..6);
        let x = random_input(&mut g, d);
        // Include radii past 1 and points on the domain edge.
        let r = if trial % 10 == 0 { 1.3 } else { g.random_range(0.0..0.6) };
        let x: Vec<f64> = x.into_iter().map(|v| if v < 0.05 { 0.0 } else if v > 0.95 { 1.0 } else { v }).collect();
        let region = make_region(&x, r).unwrap();
        for p in region.sample_range(&SeededStream::new(trial, 0), 0, 100) {
            for (i, &v) in p.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) || (v - x[i]).abs() > r + 1e-15 {
                    violations += 1;
                }
            }
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn samples_are_uniform_per_component() {
    let region = make_region(&[0.5, 0.1, 0.95], 0.2).unwrap();
    let pts = region.sample_range(&SeededStream::new(2024, 0), 0, 100_000);
    let critical = ChiSquared::new(9.0).unwrap().inverse_cdf(0.999);
    for i in 0..3 {
        let (lo, hi) = (region.lower()[i], region.upper()[i]);
        let stat = chi_square_uniform(pts.iter().map(|p| p[i]), lo, hi, 10);
        assert!(stat < critical, "component {i}: chi2 = {stat} >= {critical}");
    }
}

proptest! {
    #[test]
    fn model_file_round_trip(seed in any::<u64>(), depth in 0usize..3) {
        let m = random_model(&mut rng(seed), depth);
        let back: MlpModel<f64> = model_from_json(&model_to_json(&m)).unwrap();
        prop_assert_eq!(m, back);
    }

    #[test]
    fn sampling_is_partition_independent(seed in any::<u64>(), stream in any::<u64>(), split in 0usize..200) {
        let region = make_region(&[0.2, 0.8, 0.5], 0.3).unwrap();
        let s = SeededStream::new(seed, stream);
        let whole = region.sample_range(&s, 0, 200);
        let mut parts = region.sample_range(&s, 0, split);
        parts.extend(region.sample_range(&s, split as u64, 200 - split));
        prop_assert_eq!(whole, parts);
    }
}
