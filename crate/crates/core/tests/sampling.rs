mod common;

use ebp::per::{PerConfig, PrioritizedStore, SumTree};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn energy_sampling_fits_proportional_law() {
    for (energies, seed) in [(vec![0.5, 0.5, 1.0], 1), (vec![1.0, 3.0], 2), (vec![0.0, 2.0, 0.25, 0.75, 5.0], 3)] {
        let b = common::energy_buffer(&energies);
        let total: f64 = energies.iter().sum();
        let probs: Vec<f64> = energies.iter().map(|e| e / total).collect();
        let p = common::chi_square_p(&common::draw_counts(&b, 100_000, seed), &probs);
        assert!(p > 0.01, "{energies:?}: p = {p}");
    }
}

#[test]
fn three_sigma_frequencies() {
    let counts = common::draw_counts(&common::energy_buffer(&[0.5, 0.5, 1.0]), 100_000, 4);
    for (c, p) in counts.iter().zip([0.25, 0.25, 0.5]) {
        let sigma = (100_000.0 * p * (1.0 - p) as f64).sqrt();
        assert!((*c as f64 - 100_000.0 * p).abs() < 3.0 * sigma);
    }
}

#[test]
fn zero_energy_falls_back_to_uniform() {
    let b = common::energy_buffer(&[0.0, 0.0, 0.0]);
    let p = common::chi_square_p(&common::draw_counts(&b, 100_000, 5), &[1.0 / 3.0; 3]);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn per_with_zero_alpha_is_uniform() {
    let config = PerConfig { alpha: 0.0, ..PerConfig::default() };
    let mut store = PrioritizedStore::new(8, config).unwrap();
    for i in 0..8 {
        store.insert(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let deltas: Vec<f64> = (0..8).map(|_| rng.gen_range(-10.0..10.0)).collect();
    store.update_priorities(&(0..8).collect::<Vec<_>>(), &deltas).unwrap();
    let mut counts = vec![0u64; 8];
    for _ in 0..100_000 {
        counts[store.sample(&mut rng).unwrap()] += 1;
    }
    assert!(common::chi_square_p(&counts, &[0.125; 8]) > 0.01);
}

#[test]
fn sum_tree_agrees_with_linear_scan() {
    let (queries, mismatches) = common::sum_tree_fuzz(7);
    assert!(queries >= 100_000);
    assert_eq!(mismatches, 0);
}

proptest! {
    #[test]
    fn sum_tree_matches_scan_on_arbitrary_priorities(
        priorities in prop::collection::vec(0.0f64..10.0, 1..200),
        fractions in prop::collection::vec(0.0f64..1.0, 1..50),
    ) {
        let mut tree = SumTree::new(priorities.len());
        for (i, &p) in priorities.iter().enumerate() {
            tree.update(i, p).unwrap();
        }
        let total = tree.total();
        prop_assume!(total > 0.0);
        for f in fractions {
            let prefix = f * total;
            let leaf = tree.sample(prefix).unwrap();
            prop_assert!(priorities[leaf] > 0.0);
            let before: f64 = priorities[..leaf].iter().sum();
            let through = before + priorities[leaf];
            // float reassociation may move a boundary by a few ulps
            let slack = 1e-9 * total;
            prop_assert!(before - slack <= prefix && prefix < through + slack);
        }
    }
}
