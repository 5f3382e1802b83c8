mod common;

use common::{brute_table, k2, random_instance, rel_err};
use patrol_core::evaluator::{
    hopeless_slots, layered_values, protection_table_with, soft_weights, ProtectionValues, SearchOptions,
};
use patrol_core::oracle::OracleError;
use patrol_core::{
    evaluate, hard_value, protection_table, soft_value_gradient, EvalError, GradientRoute, SofteningConfig, Strategy,
};
use proptest::prelude::*;

const LIMIT: usize = 20_000;

fn hard_only() -> SofteningConfig {
    SofteningConfig {
        margin: 0.0,
        ..SofteningConfig::default()
    }
}

#[test]
fn k2_tables() {
    let (g, idx, s) = k2(2, 1.0);
    let t = protection_table(&g, &idx, &s).unwrap();
    for slot in 0..2 {
        for tau in 0..2 {
            assert_eq!(t.value(slot, tau), 100.0);
        }
    }

    let (g, idx, s) = k2(1, 1.0);
    let t = protection_table(&g, &idx, &s).unwrap();
    assert!(t.entry(0, 0).is_none());
    assert_eq!(t.value(0, 1), 100.0);

    let (g, idx, s) = k2(4, 0.5);
    let t = protection_table(&g, &idx, &s).unwrap();
    assert_eq!(t.value(0, 0), 75.0);
    assert_eq!(t.value(0, 1), 100.0);
    assert_eq!(t.value(1, 0), 75.0);
    assert_eq!(t.value(1, 1), 100.0);
}

#[test]
fn k2_worst_case_values() {
    let (g, idx, s) = k2(2, 1.0);
    let t = protection_table(&g, &idx, &s).unwrap();
    assert_eq!(hard_value(&t, &g, &idx, &s, 1e-6).unwrap().value, 100.0);

    let (g, idx, s) = k2(1, 1.0);
    let t = protection_table(&g, &idx, &s).unwrap();
    let r = hard_value(&t, &g, &idx, &s, 1e-6).unwrap();
    assert_eq!(r.value, 0.0);
    assert_eq!((r.worst_case.slot, g.id(r.worst_case.target)), (0, "a"));

    let (g, idx, s) = k2(4, 0.5);
    let t = protection_table(&g, &idx, &s).unwrap();
    let r = hard_value(&t, &g, &idx, &s, 1e-6).unwrap();
    assert_eq!(r.value, 75.0);
    assert_eq!(r.per_candidate.len(), 4);
}

#[test]
fn unsupported_slots_are_not_candidates() {
    let (g, idx, _) = k2(2, 1.0);
    let s = Strategy::new(vec![1.0, 1.0]);
    let t = protection_table(&g, &idx, &s).unwrap();
    let r = hard_value(&t, &g, &idx, &s, 1.5).unwrap_err();
    assert_eq!(r, EvalError::EmptySupport(1.5));
}

#[test]
fn single_candidate_gradient() {
    // P((a->b), a) = 50 x + 25 x^2 y with x = sigma(b->a), y = sigma(a->b)
    let (g, idx, s) = k2(4, 0.5);
    let t = protection_table(&g, &idx, &s).unwrap();
    let (v, grad) = soft_value_gradient(&t, &g, &idx, &s, &hard_only()).unwrap();
    assert_eq!(v, 75.0);
    assert_eq!(grad, vec![25.0, 100.0]);
}

#[test]
fn tied_candidates_share_the_direction() {
    // P((b->a), a) = 50 + 25 x y adds [25, 25]; the tie averages the two.
    let (g, idx, s) = k2(4, 0.5);
    let t = protection_table(&g, &idx, &s).unwrap();
    let (_, weights) = soft_weights(&t, &g, &idx, &s, &SofteningConfig::default()).unwrap();
    assert_eq!(weights, vec![(0, 0, 0.5), (1, 0, 0.5)]);
    let (_, grad) = soft_value_gradient(&t, &g, &idx, &s, &SofteningConfig::default()).unwrap();
    assert_eq!(grad, vec![25.0, 62.5]);
    assert!(grad[idx.find_slot(1, 0).unwrap()] > 0.0);
}

#[test]
fn softmax_weights_favor_the_worst() {
    let (g, idx, s) = k2(4, 0.5);
    let t = protection_table(&g, &idx, &s).unwrap();
    let cfg = SofteningConfig {
        margin: 200.0,
        temperature: 10.0,
        ..SofteningConfig::default()
    };
    let (_, weights) = soft_weights(&t, &g, &idx, &s, &cfg).unwrap();
    let total: f64 = weights.iter().map(|w| w.2).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let worst = weights.iter().find(|w| w.0 == 0 && w.1 == 0).unwrap().2;
    let best = weights.iter().find(|w| w.0 == 0 && w.1 == 1).unwrap().2;
    assert!((worst / best - 2.5f64.exp()).abs() < 1e-9);
}

#[test]
fn perfect_detection_first_visit_is_full_cost() {
    let (g, idx, s) = k2(3, 1.0);
    let t = protection_table(&g, &idx, &s).unwrap();
    // Only the first arrival at a counts; the second (time 4) is out of range anyway.
    assert_eq!(t.value(0, 0), 100.0);
    let (g, idx, s) = k2(9, 1.0);
    let t = protection_table(&g, &idx, &s).unwrap();
    assert_eq!(t.value(0, 0), 100.0);
    assert_eq!(t.value(1, 1), 100.0);
}

#[test]
fn rejects_unnormalized_strategies() {
    let (g, idx, _) = k2(2, 1.0);
    let s = Strategy::new(vec![0.5, 1.0]);
    assert!(matches!(protection_table(&g, &idx, &s), Err(EvalError::Strategy(_))));
    assert!(matches!(layered_values(&g, &idx, &s), Err(EvalError::Strategy(_))));
}

#[test]
fn layers_come_out_in_increasing_time() {
    for seed in 0..50 {
        let inst = random_instance(seed);
        let t = protection_table(&inst.graph, &inst.index, &inst.sigma).unwrap();
        for st in t.stats() {
            assert!(st.layers.windows(2).all(|w| w[0] < w[1]), "seed {seed}");
            assert_eq!(st.lambda, st.layers.len());
        }
    }
}

#[test]
fn coalescing_changes_nothing_but_heap_size() {
    for seed in 0..80 {
        let inst = random_instance(seed);
        let (g, idx, s) = (&inst.graph, &inst.index, &inst.sigma);
        let merged = protection_table_with(g, idx, s, SearchOptions { coalesce: true }).unwrap();
        let plain = protection_table_with(g, idx, s, SearchOptions { coalesce: false }).unwrap();
        for k in 0..g.targets().len() {
            for slot in 0..idx.n_slots() {
                let (a, b) = (merged.value(slot, k), plain.value(slot, k));
                assert!((a - b).abs() <= 1e-9, "seed {seed}: {a} vs {b}");
            }
        }
        assert!(merged.heap_within(idx.n_pairs()), "seed {seed}");
        assert!(plain.heap_within(idx.n_slots().max(idx.n_pairs())), "seed {seed}");
    }
}

#[test]
fn zero_probability_slots_keep_their_gradient() {
    // Moving mass onto an unused slot changes the value; the table must say so.
    let g3 = patrol_core::GraphBuilder::new()
        .target("a", 100.0, 4, 0.5)
        .target("b", 100.0, 4, 1.0)
        .vertex("c")
        .undirected("a", "b", 1)
        .undirected("b", "c", 1)
        .build()
        .unwrap();
    let idx = patrol_core::StrategyIndex::uniform(&g3, 1).unwrap();
    let b = idx.pair_id(g3.vertex("b").unwrap(), 1).unwrap();
    let c = idx.pair_id(g3.vertex("c").unwrap(), 1).unwrap();
    let a = idx.pair_id(g3.vertex("a").unwrap(), 1).unwrap();
    let mut probs = vec![1.0; idx.n_slots()];
    probs[idx.find_slot(b, a).unwrap()] = 1.0;
    probs[idx.find_slot(b, c).unwrap()] = 0.0;
    let s = Strategy::new(probs);
    let t = protection_table(&g3, &idx, &s).unwrap();
    let ab = idx.find_slot(a, b).unwrap();
    let bc = idx.find_slot(b, c).unwrap();
    let grad = t.grad(ab, 0).unwrap();
    assert!(grad.get(bc) != 0.0);
    let adj = layered_values(&g3, &idx, &s)
        .unwrap()
        .adjoint_gradient(&s, &[(ab, 0, 1.0)]);
    assert!((adj[bc] - grad.get(bc)).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn search_matches_brute_force(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let (g, idx, s) = (&inst.graph, &inst.index, &inst.sigma);
        let brute = match brute_table(g, idx, s, LIMIT) {
            Ok(b) => b,
            Err(OracleError::TooManyPaths(_)) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        let table = protection_table(g, idx, s).unwrap();
        for (k, row) in brute.iter().enumerate() {
            for (slot, &want) in row.iter().enumerate() {
                prop_assert!((table.value(slot, k) - want).abs() <= 1e-9,
                    "slot {slot} target {k}: {} vs {want}", table.value(slot, k));
            }
        }
    }

    #[test]
    fn layered_matches_search(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let (g, idx, s) = (&inst.graph, &inst.index, &inst.sigma);
        let table = protection_table(g, idx, s).unwrap();
        let layered = layered_values(g, idx, s).unwrap();
        for k in 0..g.targets().len() {
            for slot in 0..idx.n_slots() {
                prop_assert!((ProtectionValues::value(&layered, slot, k) - table.value(slot, k)).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn adjoint_matches_forward_gradients(seed in any::<u64>(), wseed in any::<u64>()) {
        let inst = random_instance(seed);
        let (g, idx, s) = (&inst.graph, &inst.index, &inst.sigma);
        let table = protection_table(g, idx, s).unwrap();
        let layered = layered_values(g, idx, s).unwrap();
        // A few arbitrary weighted entries.
        let n_entries = idx.n_slots() * g.targets().len();
        let weights: Vec<(usize, usize, f64)> = (0..4u64)
            .map(|i| {
                let h = patrol_core::seeds::derive_seed(wseed, i);
                let e = (h % n_entries as u64) as usize;
                (e % idx.n_slots(), e / idx.n_slots(), 0.25 + (h >> 40) as f64 / (1u64 << 24) as f64)
            })
            .collect();
        let adj = layered.adjoint_gradient(s, &weights);
        let mut fwd = vec![0.0; idx.n_slots()];
        for &(slot, k, w) in &weights {
            if let Some(gr) = table.grad(slot, k) {
                gr.add_to_dense(&mut fwd, w);
            }
        }
        for (a, b) in adj.iter().zip(&fwd) {
            prop_assert!(rel_err(*a, *b) <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn routes_agree_on_value_and_direction(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let (g, idx, s) = (&inst.graph, &inst.index, &inst.sigma);
        let cfg = SofteningConfig::default();
        let a = evaluate(g, idx, s, &cfg, GradientRoute::Adjoint).unwrap();
        let f = evaluate(g, idx, s, &cfg, GradientRoute::Forward).unwrap();
        prop_assert!((a.value - f.value).abs() <= 1e-9);
        for (x, y) in a.gradient.iter().zip(&f.gradient) {
            prop_assert!(rel_err(*x, *y) <= 1e-9);
        }
        prop_assert!(a.stats.is_none() && f.stats.is_some());
    }
}

#[test]
fn hopeless_slots_follow_travel_times() {
    // Budget 1: after (a -> b) the walk is at b and a is one more unit away.
    let (g, idx, _) = k2(1, 1.0);
    let h = hopeless_slots(&g, &idx);
    let (ka, kb) = (0, 1);
    assert_eq!(g.id(g.targets()[ka]), "a");
    let (ab, ba) = (0, 1);
    assert!(h[ka][ab] && !h[ka][ba]);
    assert!(!h[kb][ab] && h[kb][ba]);
    let (g, idx, _) = k2(2, 1.0);
    assert!(hopeless_slots(&g, &idx).iter().flatten().all(|&x| !x));
}

#[test]
fn hopeless_candidates_push_their_slot_down() {
    // Corridor a - x - b with a dead end: from x, going to a spends the whole
    // budget for b, so (x -> a) is hopeless for b.
    let g = patrol_core::GraphBuilder::new()
        .target("a", 100.0, 4, 1.0)
        .target("b", 100.0, 4, 1.0)
        .vertex("x")
        .undirected("a", "x", 2)
        .undirected("x", "b", 1)
        .build()
        .unwrap();
    let idx = patrol_core::StrategyIndex::uniform(&g, 1).unwrap();
    let (x, a) = (g.vertex("x").unwrap(), g.vertex("a").unwrap());
    let xa = idx
        .find_slot(idx.pair_id(x, 1).unwrap(), idx.pair_id(a, 1).unwrap())
        .unwrap();
    let kb = g.targets().iter().position(|&t| g.id(t) == "b").unwrap();
    assert!(hopeless_slots(&g, &idx)[kb][xa]);

    let s = patrol_core::normalize_full(&Strategy::new(vec![1.0; idx.n_slots()]), &idx).0;
    let drained = SofteningConfig {
        margin: 0.0,
        ..SofteningConfig::default()
    };
    let plain = SofteningConfig {
        drain_hopeless: false,
        ..drained
    };
    let t = protection_table(&g, &idx, &s).unwrap();
    let r = hard_value(&t, &g, &idx, &s, 1e-6).unwrap();
    assert_eq!((r.worst_case.slot, r.worst_case.target), (xa, g.targets()[kb]));
    let (_, with) = soft_value_gradient(&t, &g, &idx, &s, &drained).unwrap();
    let (_, without) = soft_value_gradient(&t, &g, &idx, &s, &plain).unwrap();
    assert!(without.iter().all(|&x| x == 0.0));
    for (i, (w, o)) in with.iter().zip(&without).enumerate() {
        let want = if i == xa { o - 100.0 } else { *o };
        assert_eq!(*w, want);
    }
    for route in [GradientRoute::Adjoint, GradientRoute::Forward] {
        assert_eq!(evaluate(&g, &idx, &s, &drained, route).unwrap().gradient, with);
    }
}

#[test]
fn soft_value_is_the_hard_value_without_a_margin() {
    for seed in 0..40 {
        let inst = random_instance(seed);
        let (g, idx, s) = (&inst.graph, &inst.index, &inst.sigma);
        let e = evaluate(g, idx, s, &hard_only(), GradientRoute::Adjoint).unwrap();
        assert!((e.soft_value - e.value).abs() <= 1e-9);
        let wide = SofteningConfig {
            margin: 1e3,
            temperature: 10.0,
            ..SofteningConfig::default()
        };
        let e = evaluate(g, idx, s, &wide, GradientRoute::Forward).unwrap();
        assert!(e.soft_value >= e.value - 1e-9);
    }
}
