//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use patrol_core::oracle::{brute_protection_limited, OracleError};
use patrol_core::{random_strategy, GraphBuilder, PatrollingGraph, Strategy, StrategyIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub seed: u64,
    pub graph: PatrollingGraph,
    pub index: StrategyIndex,
    pub sigma: Strategy,
}

/// Two targets `a`, `b` joined by a unit edge both ways, memory 1.
pub fn k2(attack_time: u32, beta_a: f64) -> (PatrollingGraph, StrategyIndex, Strategy) {
    let g = GraphBuilder::new()
        .target("a", 100.0, attack_time, beta_a)
        .target("b", 100.0, attack_time, 1.0)
        .undirected("a", "b", 1)
        .build()
        .unwrap();
    let idx = StrategyIndex::uniform(&g, 1).unwrap();
    (g, idx, Strategy::new(vec![1.0, 1.0]))
}

/// Small random instance: up to 6 vertices, edge times up to 3, attack
/// times up to 12, memory 1 or 2 per vertex, some zero-probability slots.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=6usize);
    let mut b = GraphBuilder::new();
    let forced_target = rng.random_range(0..n);
    for v in 0..n {
        let id = format!("v{v}");
        if v == forced_target || rng.random_bool(0.6) {
            let cost = rng.random_range(1.0..=100.0f64);
            let attack_time = rng.random_range(1..=12u32);
            let beta = if rng.random_bool(0.3) {
                1.0
            } else {
                rng.random_range(0.3..1.0f64)
            };
            b.target(id, cost, attack_time, beta);
        } else {
            b.vertex(id);
        }
    }
    for i in 0..n {
        let mut has_out = false;
        for j in 0..n {
            if i != j && rng.random_bool(0.5) {
                b.edge(format!("v{i}"), format!("v{j}"), rng.random_range(1..=3u32));
                has_out = true;
            }
        }
        if !has_out {
            let j = (i + rng.random_range(1..n)) % n;
            b.edge(format!("v{i}"), format!("v{j}"), rng.random_range(1..=3u32));
        }
    }
    let graph = b.build().unwrap();
    let mem: Vec<u32> = (0..n).map(|_| rng.random_range(1..=2u32)).collect();
    let index = StrategyIndex::new(&graph, &mem).unwrap();

    let mut sigma = random_strategy(&index, rng.random());
    for row in index.rows() {
        let vals = &mut sigma.probs[row.clone()];
        for i in 0..vals.len() {
            let alive = vals.iter().filter(|&&x| x > 0.0).count();
            if alive > 1 && rng.random_bool(0.15) {
                vals[i] = 0.0;
            }
        }
        let sum: f64 = vals.iter().sum();
        vals.iter_mut().for_each(|x| *x /= sum);
    }
    Instance {
        seed,
        graph,
        index,
        sigma,
    }
}

/// Brute-force protection of every `(slot, target)`, indexed
/// `[target ordinal][slot]`. Fails once any entry explores more than `limit` paths.
pub fn brute_table(
    g: &PatrollingGraph,
    idx: &StrategyIndex,
    sigma: &Strategy,
    limit: usize,
) -> Result<Vec<Vec<f64>>, OracleError> {
    g.targets()
        .iter()
        .map(|&tau| {
            (0..idx.n_slots())
                .map(|s| brute_protection_limited(g, idx, sigma, s, tau, limit))
                .collect()
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|, 1)`
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
