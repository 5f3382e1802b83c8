//! Instance families: random grid points, user-supplied point clouds, and
//! office buildings.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{GraphBuilder, GraphError, PatrollingGraph};
use crate::seeds::derive_seed;
use crate::strategy::{Strategy, StrategyError, StrategyIndex};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("cannot pick {k} distinct points from a {n}x{n} grid")]
    TooManyTargets { n: usize, k: usize },
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("duplicate point ({0}, {1})")]
    DuplicatePoint(i64, i64),
    #[error("invalid cost range [{0}, {1}]")]
    CostRange(f64, f64),
    #[error("floors must be 1, 2 or 3, got {0}")]
    Floors(usize),
    #[error("the patrol tour needs at least {needed} memory elements, got {got}")]
    TourMemory { needed: u32, got: u32 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

/// Common attack time of all targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackTimeRule {
    /// `time_max + time_avg + 3`
    Standard,
    /// `2 * time_max + time_avg`
    Extended,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaRule {
    Perfect,
    Uniform { lo: f64, hi: f64 },
}

impl BetaRule {
    pub const IMPERFECT: BetaRule = BetaRule::Uniform { lo: 0.8, hi: 1.0 };
}

/// Parameters for a complete graph over given points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointsSpec {
    pub seed: u64,
    pub cost_range: (f64, f64),
    pub attack_time_rule: AttackTimeRule,
    pub beta_rule: BetaRule,
}

impl Default for PointsSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            cost_range: (180.0, 200.0),
            attack_time_rule: AttackTimeRule::Standard,
            beta_rule: BetaRule::Perfect,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub cost_range: (f64, f64),
    pub attack_time_rule: AttackTimeRule,
    pub beta_rule: BetaRule,
}

impl GridSpec {
    pub fn new(n: usize, k: usize, seed: u64) -> Self {
        Self {
            n,
            k,
            seed,
            cost_range: (180.0, 200.0),
            attack_time_rule: AttackTimeRule::Standard,
            beta_rule: BetaRule::Perfect,
        }
    }
}

/// Synthetic 18-point layout on a 30x30 block map. Not real geography; it
/// stands in for an unpublished ATM network of the same size.
pub const SYNTHETIC_ATM_LAYOUT: [(i64, i64); 18] = [
    (2, 3),
    (5, 11),
    (8, 4),
    (11, 16),
    (14, 7),
    (3, 22),
    (17, 13),
    (20, 2),
    (22, 19),
    (25, 9),
    (9, 27),
    (15, 24),
    (27, 26),
    (28, 15),
    (6, 17),
    (19, 28),
    (12, 10),
    (24, 4),
];

/// `k` distinct random points of an `n x n` lattice, joined into a complete
/// digraph with L1 travel times.
pub fn gen_grid(spec: &GridSpec) -> Result<PatrollingGraph, GenError> {
    let cells = spec.n.checked_mul(spec.n).unwrap_or(usize::MAX);
    if spec.k > cells || spec.k < 2 {
        return Err(GenError::TooManyTargets { n: spec.n, k: spec.k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let points: Vec<(i64, i64)> = sample(&mut rng, cells, spec.k)
        .into_iter()
        .map(|c| ((c % spec.n) as i64, (c / spec.n) as i64))
        .collect();
    let names: Vec<String> = points.iter().map(|(x, y)| format!("x{x}y{y}")).collect();
    build_complete(
        &points,
        &names,
        &PointsSpec {
            seed: derive_seed(spec.seed, 1),
            cost_range: spec.cost_range,
            attack_time_rule: spec.attack_time_rule,
            beta_rule: spec.beta_rule,
        },
    )
}

/// Complete digraph over user points; vertices are named `p0, p1, ...`.
pub fn gen_points_complete(points: &[(i64, i64)], spec: &PointsSpec) -> Result<PatrollingGraph, GenError> {
    let names: Vec<String> = (0..points.len()).map(|i| format!("p{i}")).collect();
    build_complete(points, &names, spec)
}

fn build_complete(points: &[(i64, i64)], names: &[String], spec: &PointsSpec) -> Result<PatrollingGraph, GenError> {
    if points.len() < 2 {
        return Err(GenError::TooFewPoints(points.len()));
    }
    let mut seen = std::collections::HashSet::new();
    for &(x, y) in points {
        if !seen.insert((x, y)) {
            return Err(GenError::DuplicatePoint(x, y));
        }
    }
    let (lo, hi) = spec.cost_range;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(GenError::CostRange(lo, hi));
    }

    let mut edges = Vec::new();
    for (i, a) in points.iter().enumerate() {
        for (j, b) in points.iter().enumerate() {
            if i != j {
                let l1 = (a.0 - b.0).abs() + (a.1 - b.1).abs();
                edges.push((i, j, l1.max(1) as u32));
            }
        }
    }
    let time_max = edges.iter().map(|e| e.2).max().unwrap() as f64;
    let time_avg = edges.iter().map(|e| e.2 as f64).sum::<f64>() / edges.len() as f64;
    let d = match spec.attack_time_rule {
        AttackTimeRule::Standard => time_max + time_avg + 3.0,
        AttackTimeRule::Extended => 2.0 * time_max + time_avg,
    }
    .round() as u32;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut b = GraphBuilder::new();
    for name in names {
        let cost = if lo == hi { lo } else { rng.random_range(lo..=hi) };
        let beta = match spec.beta_rule {
            BetaRule::Perfect => 1.0,
            BetaRule::Uniform { lo, hi } if lo == hi => lo,
            BetaRule::Uniform { lo, hi } => rng.random_range(lo..=hi),
        };
        b.target(name.clone(), cost, d, beta);
    }
    for (i, j, t) in edges {
        b.edge(names[i].clone(), names[j].clone(), t);
    }
    Ok(b.build()?)
}

/// Overrides for the office family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct OfficeOverrides {
    pub detection: Option<f64>,
    pub attack_time: Option<u32>,
}

impl OfficeOverrides {
    /// One floor, perfect detection, attack time exactly one tour length.
    pub const TIGHT_TOUR: OfficeOverrides = OfficeOverrides {
        detection: Some(1.0),
        attack_time: Some(112),
    };
}

/// Length of the tour returned by [`office_tour_strategy`].
pub const OFFICE_TOUR_TIME: u32 = 112;

fn circle(f: usize, i: usize) -> String {
    format!("f{f}.c{i}")
}

fn office(f: usize, i: usize, side: char) -> String {
    format!("f{f}.o{i}{side}")
}

fn end_office(f: usize, i: usize) -> String {
    format!("f{f}.r{i}")
}

/// Office building with `floors` floors. Per floor: corridor circles
/// `c1..c4` (not targets) joined by time-2 corridor edges, offices `o{i}u`
/// and `o{i}d` beside each circle and end offices `r0` (at `c1`) and `r5`
/// (at `c4`), all reached in time 5. Stairs of time 10 join `c1` and `c4` of
/// consecutive floors. Offices cost 100, detect with 0.9 and need
/// `100 * floors` time units to be robbed.
pub fn gen_office(floors: usize) -> Result<PatrollingGraph, GenError> {
    gen_office_with(floors, OfficeOverrides::default())
}

pub fn gen_office_with(floors: usize, overrides: OfficeOverrides) -> Result<PatrollingGraph, GenError> {
    if !(1..=3).contains(&floors) {
        return Err(GenError::Floors(floors));
    }
    let cost = 100.0;
    let beta = overrides.detection.unwrap_or(0.9);
    let d = overrides.attack_time.unwrap_or(100 * floors as u32);

    let mut b = GraphBuilder::new();
    for f in 1..=floors {
        b.target(end_office(f, 0), cost, d, beta);
        for i in 1..=4 {
            b.vertex(circle(f, i));
            b.target(office(f, i, 'u'), cost, d, beta);
            b.target(office(f, i, 'd'), cost, d, beta);
        }
        b.target(end_office(f, 5), cost, d, beta);
    }
    for f in 1..=floors {
        b.undirected(&end_office(f, 0), &circle(f, 1), 5);
        for i in 1..=4 {
            b.undirected(&circle(f, i), &office(f, i, 'u'), 5);
            b.undirected(&circle(f, i), &office(f, i, 'd'), 5);
            if i < 4 {
                b.undirected(&circle(f, i), &circle(f, i + 1), 2);
            }
        }
        b.undirected(&circle(f, 4), &end_office(f, 5), 5);
    }
    for f in 1..floors {
        b.undirected(&circle(f, 1), &circle(f + 1, 1), 10);
        b.undirected(&circle(f, 4), &circle(f + 1, 4), 10);
    }
    Ok(b.build()?)
}

/// Vertex sequence of the cyclic one-floor tour: along the corridor visiting
/// both offices at every circle, out to `r5`, and straight back to `r0`.
pub fn office_tour() -> Vec<String> {
    let f = 1;
    let mut tour = vec![end_office(f, 0)];
    for i in 1..=4 {
        tour.push(circle(f, i));
        tour.push(office(f, i, 'u'));
        tour.push(circle(f, i));
        tour.push(office(f, i, 'd'));
        tour.push(circle(f, i));
    }
    tour.push(end_office(f, 5));
    for i in (1..=4).rev() {
        tour.push(circle(f, i));
    }
    tour
}

/// Deterministic-update strategy following [`office_tour`] on a one-floor
/// office graph with `mem` memory elements everywhere. The `k`-th occurrence
/// of a vertex in the tour uses memory element `k`; spare memory elements
/// copy the row of element 1.
pub fn office_tour_strategy(g: &PatrollingGraph, mem: u32) -> Result<(StrategyIndex, Strategy), GenError> {
    let tour = office_tour();
    let mut count = vec![0u32; g.n_vertices()];
    let mut states = Vec::with_capacity(tour.len());
    for id in &tour {
        let v = g.vertex(id).ok_or_else(|| GraphError::UnknownVertex(id.clone()))?;
        count[v] += 1;
        states.push((v, count[v]));
    }
    let needed = count.iter().copied().max().unwrap_or(1);
    if mem < needed {
        return Err(GenError::TourMemory { needed, got: mem });
    }
    let index = StrategyIndex::uniform(g, mem)?;
    let mut probs = vec![0.0; index.n_slots()];
    let mut first_row_target = vec![None; g.n_vertices()];
    for k in 0..states.len() {
        let (v, m) = states[k];
        let (w, m2) = states[(k + 1) % states.len()];
        let from = index.pair_id(v, m).unwrap();
        let to = index.pair_id(w, m2).unwrap();
        let s = index
            .find_slot(from, to)
            .ok_or_else(|| GraphError::UnknownVertex(format!("{}->{}", g.id(v), g.id(w))))?;
        probs[s] = 1.0;
        if m == 1 {
            first_row_target[v] = Some(to);
        }
    }
    for (v, target) in first_row_target.iter().enumerate() {
        let to = match target {
            Some(t) => *t,
            None => continue,
        };
        for m in count[v] + 1..=mem {
            let from = index.pair_id(v, m).unwrap();
            probs[index.find_slot(from, to).unwrap()] = 1.0;
        }
    }
    Ok((index, Strategy::new(probs)))
}
