//! The context-tree model against two independent references: a
//! closed-form expression for the leaf estimator and a brute-force
//! mixture over every context tree shape.

mod common;

use common::ctw_oracle::{all_shapes, brute_force_log, kt_closed_form, zr_closed_form};
use mgtd::ctw::{CtwModel, Estimator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn incremental_scores_match_the_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for &k in &[2usize, 3, 5, 8] {
        for _ in 0..20 {
            let alphabet: Vec<u32> = (0..k as u32).collect();
            let mut model = CtwModel::new(alphabet, 0, Estimator::Kt).unwrap();
            let mut counts = vec![0u32; k];
            let len = rng.random_range(1..=50);
            for _ in 0..len {
                let sym = rng.random_range(0..k as u32);
                counts[sym as usize] += 1;
                model.update(&[], sym);
            }
            let diff = (model.log_sequence() - kt_closed_form(&counts)).abs();
            assert!(diff < 1e-9, "k = {k}, counts {counts:?}, diff {diff}");
        }
    }
}

#[test]
fn zero_redundancy_scores_match_the_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..40 {
        let mut model = CtwModel::new(vec![0, 1], 0, Estimator::Zr).unwrap();
        let mut counts = [0u32; 2];
        // skew towards one-sided sequences, where the estimator differs most
        let p = if rng.random::<f64>() < 0.5 { 0.0 } else { 0.7 };
        for _ in 0..rng.random_range(1..=30) {
            let sym = u32::from(rng.random::<f64>() < p);
            counts[sym as usize] += 1;
            model.update(&[], sym);
        }
        let diff = (model.log_sequence() - zr_closed_form(counts[0], counts[1])).abs();
        assert!(diff < 1e-9, "counts {counts:?}, diff {diff}");
    }
}

#[test]
fn binary_depth_two_has_five_shapes() {
    assert_eq!(all_shapes(0, 2).len(), 5);
}

#[test]
fn recursive_mixture_matches_brute_force_at_depth_three() {
    // depth three has 26 shapes; the acceptance gate covers depth two
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for estimator in [Estimator::Kt, Estimator::Zr] {
        for round in 0..50 {
            let mut model = CtwModel::new(vec![0, 1], 3, estimator).unwrap();
            let mut data: Vec<(Vec<u32>, u32)> = Vec::new();
            let mut recent: Vec<u32> = Vec::new();
            let bias = rng.random::<f64>();
            for _ in 0..16 {
                let sym = u32::from(rng.random::<f64>() < bias);
                let ctx: Vec<u32> = recent.clone();
                model.update(&ctx, sym);
                data.push((ctx, sym));
                recent.insert(0, sym);
                recent.truncate(3);
            }
            let expected = brute_force_log(&data, 3, estimator);
            let diff = (model.log_sequence() - expected).abs();
            assert!(
                diff < 1e-12,
                "{estimator:?} round {round}: recursive {} vs brute force {expected}",
                model.log_sequence()
            );
        }
    }
}

#[test]
fn predictions_are_brute_force_mixture_ratios() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut model = CtwModel::new(vec![0, 1], 2, Estimator::Kt).unwrap();
    let mut data: Vec<(Vec<u32>, u32)> = Vec::new();
    let mut recent: Vec<u32> = Vec::new();
    for _ in 0..24 {
        let sym = u32::from(rng.random::<f64>() < 0.3);
        let ctx = recent.clone();
        let predicted = model.predict_log(&ctx, sym);
        let before = brute_force_log(&data, 2, Estimator::Kt);
        let mut extended = data.clone();
        extended.push((ctx.clone(), sym));
        let after = brute_force_log(&extended, 2, Estimator::Kt);
        assert!((predicted - (after - before)).abs() < 1e-12);
        model.update(&ctx, sym);
        data = extended;
        recent.insert(0, sym);
        recent.truncate(2);
    }
}
