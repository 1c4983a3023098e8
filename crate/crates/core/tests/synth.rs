use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spikeloop::model::{build_random_network, potential, potential_dot, Network, Neuron, Synapse, TopologyParams};
use spikeloop::score::{count_pmf, sample_score, SpikeScore, SpikeTrain};
use spikeloop::sim::{simulate, InitMode, SimConfig};
use spikeloop::synth::{
    build_constraints, synthesize_network, synthesize_neuron, Regularizer, RowKind, Sense, SolveOptions,
    SynthesisStatus, TemplateParams, MARGIN_TOL,
};

fn instance(seed: u64, l: usize, k: usize, period: f64) -> (Network, SpikeScore) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tp = TopologyParams {
        num_neurons: l,
        num_inputs: k,
        ..Default::default()
    };
    let net = build_random_network(&tp, &mut rng).unwrap();
    let pmf = count_pmf(0.2, period, 1.0).unwrap();
    let score = sample_score(l, &pmf, &mut rng).unwrap();
    (net, score)
}

/// Periodic firings of `score` covering `[from, to)`.
fn periodic_firings(score: &SpikeScore, from: f64, to: f64) -> Vec<Vec<f64>> {
    score.trains.iter().map(|t| t.images_in(from, to)).collect()
}

#[test]
fn row_counts_match_region_enumeration() {
    let (net, mut score) = instance(3, 20, 40, 50.0);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    // seven well-separated firings at irrational-ish offsets
    let times: Vec<f64> = (0..7).map(|i| 3.0 + 7.0 * i as f64 + rng.random_range(0.0..0.9)).collect();
    score.trains[0] = SpikeTrain::new(50.0, times.clone());
    let params = TemplateParams::defaults(1.0, 1.0);
    let sys = build_constraints(&net, 0, &[&score], &params).unwrap();

    let (dt, eps, tau0, period) = (0.02, 0.2, 1.0, 50.0);
    let inside = |t: f64, lo: f64, hi: f64| (-1..=1).any(|k| {
        let shift = k as f64 * period;
        t > lo + shift && t < hi + shift
    });
    let (mut zone, mut slope, mut silence) = (0, 0, 0);
    for i in 0..2500 {
        let t = i as f64 * dt;
        if times.iter().any(|&s| inside(t, s - eps, s)) {
            zone += 1;
        }
        if times.iter().any(|&s| inside(t, s - eps, s + eps)) {
            slope += 1;
        }
        if !times.iter().any(|&s| inside(t, s - eps, s + tau0)) {
            silence += 1;
        }
    }
    // interval ends of the silent stretches are exact rows
    silence += 2 * times.len();
    assert_eq!(sys.count(RowKind::Firing), 7);
    assert_eq!(sys.count(RowKind::Pin), 7);
    assert_eq!(sys.count(RowKind::Zone), zone);
    assert_eq!(sys.count(RowKind::Slope), slope + 7);
    assert_eq!(sys.count(RowKind::Silence), silence);
    assert_eq!(sys.num_weights(), 40);
    assert!(zone >= 7 * 9 && zone <= 7 * 10, "zone rows {zone}");
}

#[test]
fn coefficients_match_unit_weight_potentials() {
    let (net, score) = instance(5, 10, 30, 20.0);
    let params = TemplateParams::defaults(1.0, 1.0);
    let l = 2;
    let sys = build_constraints(&net, l, &[&score], &params).unwrap();
    let kernel = net.kernel();
    let firings = periodic_firings(&score, -80.0, 20.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let i = rng.random_range(0..sys.num_rows());
        let k = rng.random_range(0..net.num_inputs);
        let mut unit = net.neurons[l].clone();
        let mut w = vec![0.0; net.num_inputs];
        w[k] = 1.0;
        unit.set_weights(&w);
        let row = &sys.rows[i];
        let oracle = if row.kind == RowKind::Slope {
            potential_dot(&unit, &kernel, &firings, row.time)
        } else {
            potential(&unit, &kernel, &firings, row.time)
        };
        let ours = sys.coeffs[(i, k)];
        assert!(
            (ours - oracle).abs() <= 1e-12 * (1.0 + oracle.abs()),
            "row {i} ({:?} at {}), synapse {k}: {ours} vs {oracle}",
            row.kind,
            row.time
        );
    }
}

#[test]
fn silent_neuron_without_input_keeps_zero_weights() {
    // neuron 0 is silent and listens only to neuron 1, which is silent too
    let mut net = Network {
        num_neurons: 2,
        num_inputs: 3,
        beta: 1.0,
        theta0: 1.0,
        tau0: 1.0,
        d_min: 0.5,
        d_max: 3.0,
        neurons: (0..2)
            .map(|_| Neuron {
                synapses: (0..3)
                    .map(|j| Synapse {
                        source: 1,
                        delay: 0.5 + j as f64,
                        weight: 0.0,
                    })
                    .collect(),
            })
            .collect(),
    };
    net.neurons[0].synapses[0].weight = 0.1;
    let score = SpikeScore::new(1.0, 10.0, vec![SpikeTrain::empty(10.0), SpikeTrain::empty(10.0)]).unwrap();
    let params = TemplateParams::defaults(1.0, 1.0);
    let sys = build_constraints(&net, 0, &[&score], &params).unwrap();
    assert!(sys.rows.iter().all(|r| r.kind == RowKind::Silence && r.rhs == 0.0));
    assert!(sys.coeffs.iter().all(|&c| c == 0.0));
    let res = synthesize_neuron(&net, 0, &[&score], &params, &SolveOptions::default()).unwrap();
    assert_eq!(res.status, SynthesisStatus::Feasible);
    assert!(res.weights.iter().all(|w| w.abs() < 1e-9), "{:?}", res.weights);
}

#[test]
fn two_neuron_loop_is_synthesized_and_replayed() {
    // each neuron hears the other through a dense fan of delays
    let delays: Vec<f64> = (0..200).map(|j| 0.1 + 0.05 * j as f64).collect();
    let mut net = Network {
        num_neurons: 2,
        num_inputs: delays.len(),
        beta: 1.0,
        theta0: 1.0,
        tau0: 1.0,
        d_min: 0.1,
        d_max: 10.1,
        neurons: (0..2)
            .map(|l| Neuron {
                synapses: delays
                    .iter()
                    .map(|&d| Synapse {
                        source: 1 - l,
                        delay: d,
                        weight: 0.0,
                    })
                    .collect(),
            })
            .collect(),
    };
    // every firing is preceded by an input spike arriving about β earlier
    let period = 12.0;
    let score = SpikeScore::new(
        1.0,
        period,
        vec![
            SpikeTrain::new(period, vec![2.0, 8.0]),
            SpikeTrain::new(period, vec![5.0, 11.0]),
        ],
    )
    .unwrap();
    let params = TemplateParams::defaults(1.0, 1.0);
    let res = synthesize_network(&mut net, &[&score], &params, &SolveOptions::default(), false).unwrap();
    assert!(res.feasible, "{:?}", res.results.iter().map(|r| r.status).collect::<Vec<_>>());
    assert!(res.results.iter().all(|r| r.open_loop_ok));

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let run = simulate(&net, &SimConfig::new(5.0 * period, 0.0, InitMode::ExactScore), Some(&score), &mut rng).unwrap();
    for l in 0..2 {
        let want = score.trains[l].images_in(0.0, 5.0 * period);
        let got = run.times(l);
        assert_eq!(got.len(), want.len(), "neuron {l}: {got:?}");
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-6, "neuron {l}: fired at {g}, prescribed {w}");
        }
    }
}

#[test]
fn results_do_not_depend_on_neuron_order() {
    let (mut net, score) = instance(11, 8, 500, 15.0);
    let params = TemplateParams::defaults(1.0, 1.0);
    let opts = SolveOptions::default();
    let reversed: Vec<_> = (0..net.num_neurons)
        .rev()
        .map(|l| synthesize_neuron(&net, l, &[&score], &params, &opts).unwrap())
        .collect();
    let all = synthesize_network(&mut net, &[&score], &params, &opts, false).unwrap();
    for single in reversed {
        let joint = &all.results[single.neuron];
        assert_eq!(joint.status, single.status);
        assert_eq!(joint.weights, single.weights);
    }
}

#[test]
fn feasible_weights_pass_direct_potential_recheck() {
    let (net, score) = instance(13, 12, 500, 20.0);
    let params = TemplateParams::defaults(1.0, 1.0);
    let kernel = net.kernel();
    let firings = periodic_firings(&score, -80.0, 20.0);
    for l in 0..3 {
        let res = synthesize_neuron(&net, l, &[&score], &params, &SolveOptions::default()).unwrap();
        assert_eq!(res.status, SynthesisStatus::Feasible);
        assert!(res.weights.iter().all(|w| w.abs() <= params.w_b + 1e-12));
        let sys = build_constraints(&net, l, &[&score], &params).unwrap();
        let mut neuron = net.neurons[l].clone();
        neuron.set_weights(&res.weights);
        for row in &sys.rows {
            let v = if row.kind == RowKind::Slope {
                potential_dot(&neuron, &kernel, &firings, row.time)
            } else {
                potential(&neuron, &kernel, &firings, row.time)
            };
            let slack = match row.sense {
                Sense::Ge => v - row.rhs,
                Sense::Le => row.rhs - v,
            };
            assert!(slack >= -MARGIN_TOL, "neuron {l}: {:?} row at {} misses by {slack:e}", row.kind, row.time);
        }
    }
}

#[test]
fn l2_optimum_is_not_improved_by_feasible_mixtures() {
    let (net, score) = instance(17, 10, 500, 15.0);
    let base = TemplateParams::defaults(1.0, 1.0);
    let opts = SolveOptions::default();
    let kernel = net.kernel();
    let firings = periodic_firings(&score, -80.0, 15.0);
    let l = 1;
    let best = synthesize_neuron(&net, l, &[&score], &base, &opts).unwrap();
    let other = synthesize_neuron(&net, l, &[&score], &TemplateParams { nu: Regularizer::None, ..base }, &opts).unwrap();
    assert!(best.is_feasible() && other.is_feasible(), "{:?} {:?}", best.status, other.status);
    let sys = build_constraints(&net, l, &[&score], &base).unwrap();
    for step in 1..10 {
        let t = step as f64 / 10.0;
        let w: Vec<f64> = best.weights.iter().zip(&other.weights).map(|(a, b)| (1.0 - t) * a + t * b).collect();
        let mut neuron = net.neurons[l].clone();
        neuron.set_weights(&w);
        let feasible = sys.rows.iter().all(|row| {
            let v = if row.kind == RowKind::Slope {
                potential_dot(&neuron, &kernel, &firings, row.time)
            } else {
                potential(&neuron, &kernel, &firings, row.time)
            };
            match row.sense {
                Sense::Ge => v >= row.rhs - MARGIN_TOL,
                Sense::Le => v <= row.rhs + MARGIN_TOL,
            }
        });
        assert!(feasible, "convex mixture {t} left the feasible set");
        let obj: f64 = w.iter().map(|x| x * x).sum();
        assert!(obj >= best.objective - 1e-9, "mixture {t}: {obj} < {}", best.objective);
    }
}

#[test]
fn l1_gives_sparser_weights_than_l2() {
    let base = TemplateParams::defaults(1.0, 1.0);
    let opts = SolveOptions::default();
    let (mut n1, mut n2) = (Vec::new(), Vec::new());
    for seed in 0..20 {
        let (net, score) = instance(100 + seed, 10, 500, 12.0);
        let r2 = synthesize_neuron(&net, 0, &[&score], &base, &opts).unwrap();
        let r1 = synthesize_neuron(&net, 0, &[&score], &TemplateParams { nu: Regularizer::L1, ..base }, &opts).unwrap();
        if !(r1.is_feasible() && r2.is_feasible()) {
            continue;
        }
        let tol = 1e-6 * base.w_b;
        n1.push(r1.nonzeros(tol));
        n2.push(r2.nonzeros(tol));
        let l1_of_l2: f64 = r2.weights.iter().map(|w| w.abs()).sum();
        assert!(r1.objective <= l1_of_l2 + 1e-7);
    }
    assert!(n1.len() >= 15, "only {} feasible instances", n1.len());
    n1.sort_unstable();
    n2.sort_unstable();
    let median = |v: &[usize]| v[v.len() / 2];
    assert!(median(&n1) < median(&n2), "l1 {n1:?} vs l2 {n2:?}");
}

#[test]
fn sparse_dump_lists_every_nonzero() {
    let (net, score) = instance(19, 6, 20, 10.0);
    let params = TemplateParams::defaults(1.0, 1.0);
    let sys = build_constraints(&net, 0, &[&score], &params).unwrap();
    let mut buf = Vec::new();
    sys.write_sparse(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    let header: Vec<usize> = lines.next().unwrap().split(' ').map(|v| v.parse().unwrap()).collect();
    assert_eq!(&header[..2], &[sys.num_rows(), sys.num_weights()]);
    let mut rebuilt = nalgebra::DMatrix::<f64>::zeros(header[0], header[1]);
    for _ in 0..header[2] {
        let parts: Vec<&str> = lines.next().unwrap().split(' ').collect();
        let (i, j): (usize, usize) = (parts[0].parse().unwrap(), parts[1].parse().unwrap());
        rebuilt[(i, j)] = parts[2].parse().unwrap();
    }
    assert_eq!(rebuilt, sys.coeffs);
    for (i, row) in sys.rows.iter().enumerate() {
        let parts: Vec<&str> = lines.next().unwrap().split(' ').collect();
        assert_eq!(parts[0].parse::<usize>().unwrap(), i);
        assert_eq!(parts[2].parse::<f64>().unwrap(), row.rhs);
    }
    assert!(lines.next().unwrap().starts_with("bound"));
}

#[test]
fn two_memories_share_one_weight_set() {
    let (mut net, red) = instance(23, 8, 500, 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let blue = sample_score(8, &count_pmf(0.2, 10.0, 1.0).unwrap(), &mut rng).unwrap();
    let params = TemplateParams::defaults(1.0, 1.0);
    let single = build_constraints(&net, 0, &[&red], &params).unwrap().num_rows()
        + build_constraints(&net, 0, &[&blue], &params).unwrap().num_rows();
    assert_eq!(build_constraints(&net, 0, &[&red, &blue], &params).unwrap().num_rows(), single);
    let res = synthesize_network(&mut net, &[&red, &blue], &params, &SolveOptions::default(), false).unwrap();
    assert!(res.feasible);
    for score in [&red, &blue] {
        let run = simulate(&net, &SimConfig::new(30.0, 0.0, InitMode::ExactScore), Some(score), &mut rng).unwrap();
        for l in 0..8 {
            assert_eq!(run.times(l).len(), score.trains[l].images_in(0.0, 30.0).len());
        }
    }
}
