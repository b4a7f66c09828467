use nbvb::decoders::{default_max_rounds, run_decoder, Decoder, EqualityPolicy};
use nbvb::graph::{BipartiteGraph, GraphSpec};
use nbvb::montecarlo::{run_sweep, transition_width, SweepConfig};
use nbvb::rng::rng_from_seed;
use nbvb::signal::{encode, sample_signal_as, SignalInstance, SignalModel, ValueModel};
use nbvb::Algorithm;
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn graph(n: usize, d_v: usize, d_c: usize, seed: u64) -> BipartiteGraph {
    BipartiteGraph::random_regular(GraphSpec::new(n, d_v, d_c, seed)).unwrap()
}

fn exact_signal(n: usize, alpha0: f64, seed: u64) -> SignalInstance<i128> {
    sample_signal_as(n, &SignalModel { alpha0, value_model: ValueModel::UniformIntegerExact, seed }).unwrap()
}

/// Verified sets per round, driven by hand so the estimates stay inspectable.
fn drive(dec: &mut Decoder<'_, i128>, max_rounds: usize) -> Vec<Vec<(usize, i128)>> {
    let mut rounds = Vec::new();
    while !dec.is_complete() && rounds.len() < max_rounds {
        let out = dec.round();
        if out.verified.is_empty() {
            break;
        }
        rounds.push(out.verified);
    }
    rounds
}

fn on_four_cycle(g: &BipartiteGraph, v: usize) -> bool {
    let mut seen = std::collections::HashMap::new();
    for &c in g.checks_of(v) {
        for &u in g.vars_of(c as usize) {
            if u as usize != v {
                *seen.entry(u).or_insert(0) += 1;
            }
        }
    }
    seen.values().any(|&k| k >= 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn success_means_exact_recovery(seed in any::<u64>(), alpha0 in 0.0f64..0.6, alg in prop::sample::select(Algorithm::ALL.to_vec()),
                                    cell in prop::sample::select(vec![(3usize, 4usize), (5, 6), (7, 8)])) {
        let g = graph(600, cell.0, cell.1, seed);
        let s = exact_signal(600, alpha0, seed.wrapping_add(1));
        let c = encode(&g, &s).unwrap();
        let mut dec = Decoder::new(alg, &g, &c, EqualityPolicy::exact(), &s).unwrap();
        let start = dec.state().unverified_count();
        let rounds = drive(&mut dec, 10_000);
        prop_assert!(rounds.iter().all(|r| !r.is_empty()));
        let last = dec.state().unverified_count();
        prop_assert_eq!(last + rounds.iter().map(Vec::len).sum::<usize>(), start);
        let mut wrong = 0;
        for r in &rounds {
            let bad: Vec<usize> = r.iter().filter(|&&(v, x)| x != s.values()[v]).map(|&(v, _)| v).collect();
            if wrong == 0 {
                // only majority voting can be fooled, and the first error needs a 4-cycle
                for &v in &bad {
                    prop_assert_eq!(alg, Algorithm::Xh, "wrong value at {}", v);
                    prop_assert!(on_four_cycle(&g, v), "wrong value at {} off any 4-cycle", v);
                }
            }
            wrong += bad.len();
        }
        for (v, ok) in dec.state().verified().iter().enumerate() {
            prop_assert!(!ok || dec.state().estimate()[v] == s.values()[v] || wrong > 0);
        }
        let res = run_decoder(alg, &g, &c, EqualityPolicy::exact(), &s, 10_000).unwrap();
        prop_assert_eq!(res.success, last == 0 && wrong == 0);
        prop_assert_eq!(res.mismatches, wrong);
        if alg != Algorithm::Xh {
            prop_assert_eq!(res.anomalies, 0);
        }
        prop_assert!(!(res.success && res.stall));
    }

    #[test]
    fn scan_order_does_not_matter(seed in any::<u64>(), alpha0 in 0.05f64..0.4, alg in prop::sample::select(Algorithm::ALL.to_vec())) {
        let n = 300;
        let g = graph(n, 5, 6, seed);
        let s = exact_signal(n, alpha0, seed ^ 0xABCD);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng_from_seed(seed ^ 7));
        let gp = g.relabel_variables(&perm).unwrap();
        let mut values = vec![0i128; n];
        for v in 0..n {
            values[perm[v]] = s.values()[v];
        }
        let sp = SignalInstance::from_values(values);

        let c = encode(&g, &s).unwrap();
        let cp = encode(&gp, &sp).unwrap();
        prop_assert_eq!(&c.c, &cp.c);
        let mut a = Decoder::new(alg, &g, &c, EqualityPolicy::exact(), &s).unwrap();
        let mut b = Decoder::new(alg, &gp, &cp, EqualityPolicy::exact(), &sp).unwrap();
        let ra = drive(&mut a, 10_000);
        let rb = drive(&mut b, 10_000);
        prop_assert_eq!(ra.len(), rb.len());
        for (x, y) in ra.iter().zip(&rb) {
            let mut mapped: Vec<(usize, i128)> = x.iter().map(|&(v, val)| (perm[v], val)).collect();
            mapped.sort_unstable();
            prop_assert_eq!(&mapped, y);
        }
    }
}

#[test]
fn genie_dominates() {
    let mut checked = 0;
    for seed in 0..300u64 {
        let (d_v, d_c) = [(3, 4), (5, 6), (5, 8)][seed as usize % 3];
        let n = 24 * d_c * 5;
        let g = graph(n, d_v, d_c, seed);
        let alpha0 = 0.1 + 0.5 * (seed as f64 / 300.0);
        let s = exact_signal(n, alpha0, seed + 500);
        let c = encode(&g, &s).unwrap();
        let ok = |alg| run_decoder(alg, &g, &c, EqualityPolicy::exact(), &s, default_max_rounds(n)).unwrap().success;
        let genie = ok(Algorithm::Genie);
        for alg in [Algorithm::Lm, Algorithm::Sbb, Algorithm::Xh] {
            if ok(alg) {
                checked += 1;
                assert!(genie, "{alg} succeeds where genie fails (seed {seed})");
            }
        }
    }
    assert!(checked > 50);
}

#[test]
fn decoding_is_deterministic() {
    let g = graph(1200, 5, 6, 3);
    let s = exact_signal(1200, 0.3, 4);
    let c = encode(&g, &s).unwrap();
    for alg in Algorithm::ALL {
        let a = run_decoder(alg, &g, &c, EqualityPolicy::exact(), &s, 500).unwrap();
        let b = run_decoder(alg, &g, &c, EqualityPolicy::exact(), &s, 500).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn gaussian_values_decode_with_tolerance() {
    let g = graph(3000, 5, 6, 8);
    let model = SignalModel { alpha0: 0.12, value_model: ValueModel::GaussianReal { sigma: 2.0 }, seed: 9 };
    let s: SignalInstance<f64> = sample_signal_as(3000, &model).unwrap();
    let c = encode(&g, &s).unwrap();
    for alg in Algorithm::ALL {
        let r = run_decoder(alg, &g, &c, model.value_model.default_policy(), &s, 1000).unwrap();
        assert!(r.success, "{alg}");
        assert_eq!(r.anomalies, 0);
    }
}

#[test]
fn sbb_below_threshold_succeeds_at_scale() {
    let cfg = SweepConfig::new(GraphSpec::new(100_002, 5, 6, 21), Algorithm::Sbb, vec![0.30], 1000, 22);
    let p = &run_sweep(&cfg).unwrap().points[0];
    println!("success rate {}", p.success_rate);
    assert!(p.success_rate >= 0.95);
    assert_eq!(p.anomaly_count, 0);
    assert_eq!(p.mismatch_count, 0);
}

#[test]
fn stalled_trace_is_flat() {
    let g = graph(100_002, 5, 6, 5);
    let s = exact_signal(100_002, 0.35, 6);
    let c = encode(&g, &s).unwrap();
    let r = run_decoder(Algorithm::Sbb, &g, &c, EqualityPolicy::exact(), &s, 1000).unwrap();
    assert!(r.stall && !r.success);
    assert!(r.alpha_trace.windows(2).all(|w| w[1] <= w[0]));
    let last = *r.alpha_trace.last().unwrap();
    assert!(last > 0.0);

    let s = exact_signal(100_002, 0.3072, 7);
    let r = run_decoder(Algorithm::Sbb, &g, &encode(&g, &s).unwrap(), EqualityPolicy::exact(), &s, 1000).unwrap();
    assert!(r.success);
    assert!(r.alpha_trace.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(*r.alpha_trace.last().unwrap(), 0.0);
}

#[test]
fn waterfall_sharpens_with_length() {
    let grid: Vec<f64> = (26..=40).map(|k| k as f64 / 100.0).collect();
    let mut widths = Vec::new();
    for n in [3000, 15_000, 100_002] {
        let cfg = SweepConfig::new(GraphSpec::new(n, 5, 6, 13), Algorithm::Sbb, grid.clone(), 40, 14);
        let curve = run_sweep(&cfg).unwrap();
        let w = transition_width(&curve, 0.9, 0.1).expect("curve crosses both levels");
        println!("n = {n}: width {w:.2}");
        widths.push(w);
    }
    assert!(widths.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{widths:?}");
}
