mod common;

use common::alignment::{lattice_instance, oracle, LATTICE};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spikeloop::metrics::precision_recall;

fn random_subset<R: Rng>(rng: &mut R, l: usize) -> Vec<usize> {
    let s: Vec<usize> = (0..l).filter(|_| rng.random_bool(0.7)).collect();
    if s.is_empty() {
        vec![rng.random_range(0..l)]
    } else {
        s
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn agrees_with_dense_grid_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (score, run, t0) = lattice_instance(&mut rng);
        let subset = random_subset(&mut rng, score.num_neurons());
        let rep = precision_recall(&run, &score, t0, Some(&subset)).unwrap();
        let o = oracle(&run, &score, t0, &subset);
        prop_assert!((rep.precision - o.precision).abs() < 1e-9, "pr {} vs {}", rep.precision, o.precision);
        prop_assert!((rep.recall - o.recall).abs() < 1e-9, "rc {} vs {}", rep.recall, o.recall);
        prop_assert!((rep.tau_hat - o.tau).abs() < 1e-9, "tau {} vs {}", rep.tau_hat, o.tau);
    }

    #[test]
    fn global_shift_leaves_accuracy_unchanged(seed in any::<u64>(), steps in -4000i64..4000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (score, run, t0) = lattice_instance(&mut rng);
        let all: Vec<usize> = (0..score.num_neurons()).collect();
        // tied alignments may wrap to a different representative after the shift
        prop_assume!(!oracle(&run, &score, t0, &all).ambiguous);
        let d = steps as f64 * LATTICE;
        let moved: Vec<Vec<f64>> = run.iter().map(|ts| ts.iter().map(|t| t + d).collect()).collect();
        let a = precision_recall(&run, &score, t0, None).unwrap();
        let b = precision_recall(&moved, &score, t0 + d, None).unwrap();
        prop_assert!((a.precision - b.precision).abs() < 1e-9);
        prop_assert!((a.recall - b.recall).abs() < 1e-9);
    }

    #[test]
    fn stalled_run_has_zero_precision(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (score, run, t0) = lattice_instance(&mut rng);
        // the network stops firing before the window
        let stalled: Vec<Vec<f64>> = run.iter().map(|ts| ts.iter().copied().filter(|&t| t < t0).collect()).collect();
        let rep = precision_recall(&stalled, &score, t0, None).unwrap();
        prop_assert_eq!(rep.precision, 0.0);
        prop_assert!((rep.precision - oracle(&stalled, &score, t0, &(0..score.num_neurons()).collect::<Vec<_>>()).precision).abs() < 1e-9);
    }

    #[test]
    fn matching_counts_give_equal_precision_and_recall(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (score, _, t0) = lattice_instance(&mut rng);
        // a run with exactly the prescribed count per neuron, each spike nudged
        let run: Vec<Vec<f64>> = score
            .trains
            .iter()
            .map(|tr| {
                let nudge = (rng.random_range(-60i64..=60) as f64) * LATTICE;
                tr.images_in(t0 + 1.0, t0 + 1.0 + score.period)
                    .into_iter()
                    .map(|t| t + nudge)
                    .collect()
            })
            .collect();
        let rep = precision_recall(&run, &score, t0, None).unwrap();
        for n in &rep.per_neuron {
            if n.realized == n.prescribed && n.realized > 0 {
                prop_assert!((n.precision - n.recall).abs() < 1e-12);
            }
        }
        if rep.per_neuron.iter().all(|n| n.realized == n.prescribed) && rep.per_neuron.iter().any(|n| n.realized > 0) {
            prop_assert!((rep.precision - rep.recall).abs() < 1e-9);
        }
    }
}

#[test]
fn perfect_copy_scores_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let (score, _, t0) = lattice_instance(&mut rng);
        let run: Vec<Vec<f64>> = score.trains.iter().map(|tr| tr.images_in(t0 - 3.0, t0 + 2.0 * score.period)).collect();
        let rep = precision_recall(&run, &score, t0, None).unwrap();
        if score.total_spikes() > 0 {
            assert!((rep.precision - 1.0).abs() < 1e-12 && (rep.recall - 1.0).abs() < 1e-12, "{rep:?}");
        }
    }
}
