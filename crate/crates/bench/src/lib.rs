//! Fixtures shared by the benchmarks.

use patrol_core::{
    gen_grid, gen_office, normalize_full, random_strategy, GridSpec, PatrollingGraph, Strategy, StrategyIndex,
};

/// A graph with a normalized random strategy at uniform memory `mem`.
pub struct Fixture {
    pub name: String,
    pub graph: PatrollingGraph,
    pub index: StrategyIndex,
    pub sigma: Strategy,
}

impl Fixture {
    fn new(name: String, graph: PatrollingGraph, mem: u32, seed: u64) -> Self {
        let index = StrategyIndex::uniform(&graph, mem).expect("memory sizes");
        let sigma = normalize_full(&random_strategy(&index, seed), &index).0;
        Self {
            name,
            graph,
            index,
            sigma,
        }
    }
}

pub fn office(floors: usize, mem: u32) -> Fixture {
    Fixture::new(
        format!("office{floors}_m{mem}"),
        gen_office(floors).expect("office"),
        mem,
        1,
    )
}

pub fn grid(n: usize, k: usize, mem: u32) -> Fixture {
    let g = gen_grid(&GridSpec::new(n, k, 6)).expect("grid");
    Fixture::new(format!("grid{n}x{n}_k{k}_m{mem}"), g, mem, 1)
}
