//! Regular (finite-memory) strategies over eligible pairs and edge slots.
//!
//! An eligible pair is a vertex together with a memory element `1..=mem(v)`.
//! For every graph edge `v -> v'` and every pair of memory elements there is
//! one edge slot `((v,m),(v',m'))`. A strategy assigns a probability to every
//! slot; the slots leaving one pair form a contiguous row.

use std::collections::HashMap;
use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::PatrollingGraph;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("malformed strategy document: {0}")]
    Malformed(String),
    #[error("memory size missing for vertex {0}")]
    MissingMemory(String),
    #[error("memory size must be positive at vertex {0}")]
    NonPositiveMemory(String),
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("memory element {memory} out of range at vertex {vertex}")]
    MemoryOutOfRange { vertex: String, memory: i64 },
    #[error("no edge slot from {from} to {to}")]
    NoSuchSlot { from: String, to: String },
    #[error("strategy has {got} entries, index expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("row of {pair} sums to {sum}, not 1")]
    NotNormalized { pair: String, sum: f64 },
}

/// An eligible pair `(vertex, memory)`; memory elements count from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pair {
    pub vertex: usize,
    pub memory: u32,
}

/// One eligible edge slot between two pairs over graph edge `edge`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub from: usize,
    pub to: usize,
    pub edge: usize,
}

/// Enumeration of eligible pairs and edge slots for a fixed memory assignment.
#[derive(Debug, Clone)]
pub struct StrategyIndex {
    mem: Vec<u32>,
    pair_base: Vec<usize>,
    pairs: Vec<Pair>,
    slots: Vec<Slot>,
    rows: Vec<Range<usize>>,
    in_slots: Vec<Vec<usize>>,
}

impl StrategyIndex {
    /// `mem[v]` is the memory size of vertex `v` (dense order).
    pub fn new(g: &PatrollingGraph, mem: &[u32]) -> Result<Self, StrategyError> {
        if mem.len() != g.n_vertices() {
            let missing = g.id(mem.len().min(g.n_vertices().saturating_sub(1)));
            return Err(StrategyError::MissingMemory(missing.to_string()));
        }
        if let Some(v) = mem.iter().position(|&m| m == 0) {
            return Err(StrategyError::NonPositiveMemory(g.id(v).to_string()));
        }

        let mut pair_base = Vec::with_capacity(mem.len());
        let mut pairs = Vec::new();
        for (v, &m) in mem.iter().enumerate() {
            pair_base.push(pairs.len());
            pairs.extend((1..=m).map(|memory| Pair { vertex: v, memory }));
        }

        let mut slots = Vec::new();
        let mut rows = Vec::with_capacity(pairs.len());
        let mut in_slots = vec![Vec::new(); pairs.len()];
        for (p, pair) in pairs.iter().enumerate() {
            let start = slots.len();
            for &e in g.out_edges(pair.vertex) {
                let w = g.edge(e).to;
                for m2 in 0..mem[w] as usize {
                    let to = pair_base[w] + m2;
                    in_slots[to].push(slots.len());
                    slots.push(Slot { from: p, to, edge: e });
                }
            }
            rows.push(start..slots.len());
        }

        Ok(Self {
            mem: mem.to_vec(),
            pair_base,
            pairs,
            slots,
            rows,
            in_slots,
        })
    }

    /// Same memory size at every vertex.
    pub fn uniform(g: &PatrollingGraph, m: u32) -> Result<Self, StrategyError> {
        Self::new(g, &vec![m; g.n_vertices()])
    }

    /// Memory sizes keyed by external vertex id.
    pub fn from_named(g: &PatrollingGraph, mem: &HashMap<String, i64>) -> Result<Self, StrategyError> {
        if let Some(unknown) = mem.keys().find(|k| g.vertex(k).is_none()) {
            return Err(StrategyError::UnknownVertex(unknown.clone()));
        }
        let mut dense = Vec::with_capacity(g.n_vertices());
        for id in g.ids() {
            let m = *mem.get(id).ok_or_else(|| StrategyError::MissingMemory(id.clone()))?;
            if m <= 0 || m > u32::MAX as i64 {
                return Err(StrategyError::NonPositiveMemory(id.clone()));
            }
            dense.push(m as u32);
        }
        Self::new(g, &dense)
    }

    pub fn mem(&self) -> &[u32] {
        &self.mem
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn slot(&self, s: usize) -> &Slot {
        &self.slots[s]
    }

    /// Slot range leaving pair `p`.
    pub fn row(&self, p: usize) -> Range<usize> {
        self.rows[p].clone()
    }

    pub fn rows(&self) -> &[Range<usize>] {
        &self.rows
    }

    /// Slots entering pair `p`, in slot order.
    pub fn in_slots(&self, p: usize) -> &[usize] {
        &self.in_slots[p]
    }

    pub fn pair_id(&self, vertex: usize, memory: u32) -> Option<usize> {
        (memory >= 1 && memory <= *self.mem.get(vertex)?).then(|| self.pair_base[vertex] + memory as usize - 1)
    }

    pub fn pairs_of(&self, vertex: usize) -> Range<usize> {
        let base = self.pair_base[vertex];
        base..base + self.mem[vertex] as usize
    }

    pub fn find_slot(&self, from: usize, to: usize) -> Option<usize> {
        self.row(from).find(|&s| self.slots[s].to == to)
    }

    pub fn pair_label(&self, g: &PatrollingGraph, p: usize) -> String {
        let pair = self.pairs[p];
        format!("({},{})", g.id(pair.vertex), pair.memory)
    }

    /// Last slot of every row.
    pub fn default_pivots(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.end.saturating_sub(1)).collect()
    }
}

/// Slot probabilities, indexed by slot id.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    pub probs: Vec<f64>,
}

impl Strategy {
    pub fn new(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, slot: usize) -> f64 {
        self.probs[slot]
    }

    /// Fails when a row sum deviates from 1 by more than `tol` or an entry
    /// lies outside `[-tol, 1 + tol]`.
    pub fn check_normalized(&self, g: &PatrollingGraph, index: &StrategyIndex, tol: f64) -> Result<(), StrategyError> {
        if self.probs.len() != index.n_slots() {
            return Err(StrategyError::LengthMismatch {
                expected: index.n_slots(),
                got: self.probs.len(),
            });
        }
        for (p, row) in index.rows().iter().enumerate() {
            if row.is_empty() {
                continue;
            }
            let vals = &self.probs[row.clone()];
            let sum: f64 = vals.iter().sum();
            let in_range = vals.iter().all(|&x| x >= -tol && x <= 1.0 + tol);
            if !in_range || (sum - 1.0).abs() > tol || !sum.is_finite() {
                return Err(StrategyError::NotNormalized {
                    pair: index.pair_label(g, p),
                    sum,
                });
            }
        }
        Ok(())
    }
}

/// Row-wise random distributions with full support, Dirichlet(1) per row.
pub fn random_strategy(index: &StrategyIndex, seed: u64) -> Strategy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probs = vec![0.0; index.n_slots()];
    for row in index.rows() {
        let vals = &mut probs[row.clone()];
        if vals.len() == 1 {
            vals[0] = 1.0;
            continue;
        }
        for x in vals.iter_mut() {
            let e: f64 = Exp1.sample(&mut rng);
            // Exp1 can return exactly 0 only with negligible probability; keep support full.
            *x = e.max(f64::MIN_POSITIVE);
        }
        let sum: f64 = vals.iter().sum();
        vals.iter_mut().for_each(|x| *x /= sum);
    }
    Strategy::new(probs)
}

/// Block-diagonal Jacobian of a row-wise normalization; one dense
/// row-major block per eligible pair.
#[derive(Debug, Clone, PartialEq)]
pub struct NormJacobian {
    pub blocks: Vec<Vec<f64>>,
}

impl NormJacobian {
    /// `d out[row.start + i] / d in[row.start + j]`.
    pub fn entry(&self, index: &StrategyIndex, pair: usize, i: usize, j: usize) -> f64 {
        let w = index.row(pair).len();
        self.blocks[pair][i * w + j]
    }

    /// Pulls a gradient with respect to the normalized strategy back to the
    /// raw coordinates: `xi_j = sum_i grad_i * d out_i / d in_j`.
    pub fn pull_back(&self, index: &StrategyIndex, grad: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; grad.len()];
        for (p, row) in index.rows().iter().enumerate() {
            let w = row.len();
            let block = &self.blocks[p];
            for j in 0..w {
                let mut acc = 0.0;
                for i in 0..w {
                    acc += grad[row.start + i] * block[i * w + j];
                }
                out[row.start + j] = acc;
            }
        }
        out
    }
}

#[inline]
fn crop(x: f64) -> (f64, f64) {
    if x <= 0.0 || x.is_nan() {
        (0.0, 0.0)
    } else if x >= 1.0 {
        (1.0, 0.0)
    } else {
        (x, 1.0)
    }
}

/// Divides cropped values by their sum; writes the block of the composed map.
fn scale_row(cropped: &[f64], dcrop: &[f64], out: &mut [f64], block: &mut [f64]) {
    let w = cropped.len();
    let sum: f64 = cropped.iter().sum();
    if sum <= 0.0 {
        out.iter_mut().for_each(|y| *y = 1.0 / w as f64);
        block.iter_mut().for_each(|b| *b = 0.0);
        return;
    }
    let s2 = sum * sum;
    for i in 0..w {
        out[i] = cropped[i] / sum;
        for j in 0..w {
            let delta = if i == j { sum } else { 0.0 };
            block[i * w + j] = (delta - cropped[i]) / s2 * dcrop[j];
        }
    }
}

/// Crop every entry to `[0,1]`, then divide each row by its sum.
/// A row cropping to all zeros becomes uniform with a zero Jacobian block.
pub fn normalize_full(sigma: &Strategy, index: &StrategyIndex) -> (Strategy, NormJacobian) {
    let mut out = vec![0.0; sigma.len()];
    let mut blocks = Vec::with_capacity(index.n_pairs());
    for row in index.rows() {
        let w = row.len();
        let (cropped, dcrop): (Vec<f64>, Vec<f64>) = sigma.probs[row.clone()].iter().map(|&x| crop(x)).unzip();
        let mut block = vec![0.0; w * w];
        scale_row(&cropped, &dcrop, &mut out[row.clone()], &mut block);
        blocks.push(block);
    }
    (Strategy::new(out), NormJacobian { blocks })
}

/// Crop every entry, keep the non-pivot entries and set the pivot of each
/// row to one minus the sum of the others. When that would be negative the
/// pivot becomes 0 and the remaining entries are rescaled to sum to 1.
///
/// `pivots[p]` is the slot id of the pivot of pair `p`'s row.
pub fn normalize_pivot(sigma: &Strategy, index: &StrategyIndex, pivots: &[usize]) -> (Strategy, NormJacobian) {
    let mut out = vec![0.0; sigma.len()];
    let mut blocks = Vec::with_capacity(index.n_pairs());
    for (p, row) in index.rows().iter().enumerate() {
        let w = row.len();
        let mut block = vec![0.0; w * w];
        if w == 0 {
            blocks.push(block);
            continue;
        }
        let piv = pivots[p] - row.start;
        debug_assert!(piv < w, "pivot outside its row");
        let (mut cropped, mut dcrop): (Vec<f64>, Vec<f64>) = sigma.probs[row.clone()].iter().map(|&x| crop(x)).unzip();
        cropped[piv] = 0.0;
        dcrop[piv] = 0.0;
        let others: f64 = cropped.iter().sum();
        let ys = &mut out[row.clone()];
        if others <= 1.0 {
            for i in 0..w {
                if i == piv {
                    ys[i] = 1.0 - others;
                    for j in 0..w {
                        block[i * w + j] = -dcrop[j];
                    }
                } else {
                    ys[i] = cropped[i];
                    block[i * w + i] = dcrop[i];
                }
            }
        } else {
            scale_row(&cropped, &dcrop, ys, &mut block);
        }
        blocks.push(block);
    }
    (Strategy::new(out), NormJacobian { blocks })
}

/// For every pair and successor vertex, at most one successor memory element
/// carries probability above `eps`.
pub fn is_deterministic_update(index: &StrategyIndex, sigma: &Strategy, eps: f64) -> bool {
    index.rows().iter().all(|row| {
        let mut per_edge: HashMap<usize, usize> = HashMap::new();
        row.clone().all(|s| {
            if sigma.probs[s] > eps {
                let c = per_edge.entry(index.slot(s).edge).or_insert(0);
                *c += 1;
                *c <= 1
            } else {
                true
            }
        })
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyDocument {
    pub mem: serde_json::Map<String, serde_json::Value>,
    pub rows: Vec<RowDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowDoc {
    pub from: (String, i64),
    pub to: Vec<(String, i64, f64)>,
}

impl StrategyDocument {
    pub fn from_strategy(g: &PatrollingGraph, index: &StrategyIndex, sigma: &Strategy) -> Self {
        let mem = g
            .ids()
            .iter()
            .zip(index.mem())
            .map(|(id, &m)| (id.clone(), serde_json::Value::from(m)))
            .collect();
        let rows = index
            .pairs()
            .iter()
            .enumerate()
            .map(|(p, pair)| RowDoc {
                from: (g.id(pair.vertex).to_string(), pair.memory as i64),
                to: index
                    .row(p)
                    .map(|s| {
                        let to = index.pairs()[index.slot(s).to];
                        (g.id(to.vertex).to_string(), to.memory as i64, sigma.probs[s])
                    })
                    .collect(),
            })
            .collect();
        Self { mem, rows }
    }

    /// Builds the index from `mem` and fills slot probabilities; slots not
    /// listed get probability 0.
    pub fn into_strategy(self, g: &PatrollingGraph) -> Result<(StrategyIndex, Strategy), StrategyError> {
        let mut mem = HashMap::new();
        for (k, v) in &self.mem {
            let m = v
                .as_i64()
                .ok_or_else(|| StrategyError::Malformed(format!("memory size of {k} is not an integer")))?;
            mem.insert(k.clone(), m);
        }
        let index = StrategyIndex::from_named(g, &mem)?;
        let mut probs = vec![0.0; index.n_slots()];
        let resolve = |(id, m): (&str, i64)| -> Result<usize, StrategyError> {
            let v = g
                .vertex(id)
                .ok_or_else(|| StrategyError::UnknownVertex(id.to_string()))?;
            u32::try_from(m)
                .ok()
                .and_then(|m| index.pair_id(v, m))
                .ok_or_else(|| StrategyError::MemoryOutOfRange {
                    vertex: id.to_string(),
                    memory: m,
                })
        };
        for row in &self.rows {
            let from = resolve((&row.from.0, row.from.1))?;
            for (id, m, prob) in &row.to {
                let to = resolve((id, *m))?;
                let s = index.find_slot(from, to).ok_or_else(|| StrategyError::NoSuchSlot {
                    from: index.pair_label(g, from),
                    to: index.pair_label(g, to),
                })?;
                probs[s] = *prob;
            }
        }
        Ok((index, Strategy::new(probs)))
    }
}

pub fn strategy_to_json(g: &PatrollingGraph, index: &StrategyIndex, sigma: &Strategy) -> String {
    serde_json::to_string_pretty(&StrategyDocument::from_strategy(g, index, sigma))
        .expect("strategy document serializes")
}

pub fn parse_strategy(g: &PatrollingGraph, text: &str) -> Result<(StrategyIndex, Strategy), StrategyError> {
    let doc: StrategyDocument = serde_json::from_str(text).map_err(|e| StrategyError::Malformed(e.to_string()))?;
    doc.into_strategy(g)
}

#[cfg(test)]
mod tests {
    use super::Strategy;
    use super::*;
    use crate::generators::gen_office;
    use crate::graph::GraphBuilder;
    use proptest::prelude::*;

    fn k2() -> PatrollingGraph {
        GraphBuilder::new()
            .target("a", 100.0, 2, 1.0)
            .target("b", 100.0, 2, 1.0)
            .undirected("a", "b", 1)
            .build()
            .unwrap()
    }

    /// A single pair whose row has `w` slots: a star with `w` leaves.
    fn star(w: usize) -> (PatrollingGraph, StrategyIndex) {
        let mut b = GraphBuilder::new();
        b.target("hub", 1.0, 1, 1.0);
        for i in 0..w {
            b.vertex(format!("l{i}"));
            b.edge("hub", format!("l{i}"), 1);
        }
        let g = b.build().unwrap();
        let idx = StrategyIndex::uniform(&g, 1).unwrap();
        (g, idx)
    }

    #[test]
    fn index_counts() {
        let g = k2();
        let i1 = StrategyIndex::uniform(&g, 1).unwrap();
        assert_eq!((i1.n_pairs(), i1.n_slots()), (2, 2));
        let i2 = StrategyIndex::uniform(&g, 2).unwrap();
        assert_eq!((i2.n_pairs(), i2.n_slots()), (4, 8));

        let office = gen_office(1).unwrap();
        let i3 = StrategyIndex::uniform(&office, 3).unwrap();
        let formula: usize = office.edges().iter().map(|_| 3 * 3).sum();
        assert_eq!(office.edges().len(), 26);
        assert_eq!(i3.n_pairs(), 42);
        assert_eq!(i3.n_slots(), formula);
        assert_eq!(i3.n_slots(), 234);
    }

    #[test]
    fn rows_partition_slots() {
        let g = gen_office(1).unwrap();
        let mem: Vec<u32> = (0..g.n_vertices()).map(|v| 1 + (v as u32 % 3)).collect();
        let idx = StrategyIndex::new(&g, &mem).unwrap();
        let mut next = 0;
        for (p, r) in idx.rows().iter().enumerate() {
            assert_eq!(r.start, next);
            next = r.end;
            for s in r.clone() {
                assert_eq!(idx.slot(s).from, p);
            }
        }
        assert_eq!(next, idx.n_slots());
        let expected: usize = g.edges().iter().map(|e| (mem[e.from] * mem[e.to]) as usize).sum();
        assert_eq!(idx.n_slots(), expected);
        assert_eq!(idx.n_pairs(), mem.iter().sum::<u32>() as usize);
        let total_in: usize = (0..idx.n_pairs()).map(|p| idx.in_slots(p).len()).sum();
        assert_eq!(total_in, idx.n_slots());
    }

    #[test]
    fn index_errors() {
        let g = k2();
        assert_eq!(
            StrategyIndex::new(&g, &[1, 0]).unwrap_err(),
            StrategyError::NonPositiveMemory("b".into())
        );
        let mut named = HashMap::new();
        named.insert("a".to_string(), 1);
        assert_eq!(
            StrategyIndex::from_named(&g, &named).unwrap_err(),
            StrategyError::MissingMemory("b".into())
        );
        named.insert("b".to_string(), -1);
        assert_eq!(
            StrategyIndex::from_named(&g, &named).unwrap_err(),
            StrategyError::NonPositiveMemory("b".into())
        );
    }

    #[test]
    fn random_strategy_is_reproducible() {
        let g = gen_office(1).unwrap();
        let idx = StrategyIndex::uniform(&g, 2).unwrap();
        let a = random_strategy(&idx, 42);
        assert_eq!(a, random_strategy(&idx, 42));
        assert_ne!(a, random_strategy(&idx, 43));
        a.check_normalized(&g, &idx, 1e-12).unwrap();
        assert!(a.probs.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn width_one_row_is_certain() {
        let (_, idx) = star(1);
        assert_eq!(random_strategy(&idx, 9).probs, vec![1.0]);
    }

    #[test]
    fn random_rows_are_symmetric() {
        let (_, idx) = star(3);
        let n = 10_000;
        let mut mean = [0.0; 3];
        for seed in 0..n {
            let s = random_strategy(&idx, seed);
            for (m, x) in mean.iter_mut().zip(&s.probs) {
                *m += x / n as f64;
            }
        }
        for m in mean {
            assert!((m - 1.0 / 3.0).abs() < 0.02, "{mean:?}");
        }
    }

    #[test]
    fn full_normalization_examples() {
        let (_, idx) = star(3);
        let (n, _) = normalize_full(&Strategy::new(vec![0.5, 0.5, -0.2]), &idx);
        assert_eq!(n.probs, vec![0.5, 0.5, 0.0]);

        let (_, idx2) = star(2);
        let (n, _) = normalize_full(&Strategy::new(vec![2.0, 1.0]), &idx2);
        assert_eq!(n.probs, vec![0.5, 0.5]);

        let (n, jac) = normalize_full(&Strategy::new(vec![0.4, 0.4]), &idx2);
        assert_eq!(n.probs, vec![0.5, 0.5]);
        // Central differences at h = 1e-7 give +-0.625 (frozen).
        let expected = [0.625, -0.625, -0.625, 0.625];
        for (a, b) in jac.blocks[0].iter().zip(expected) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn degenerate_row_becomes_uniform() {
        let (_, idx) = star(4);
        let (n, jac) = normalize_full(&Strategy::new(vec![-1.0, 0.0, -3.0, 0.0]), &idx);
        assert_eq!(n.probs, vec![0.25; 4]);
        assert!(jac.blocks[0].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn pivot_normalization_examples() {
        let (_, idx) = star(3);
        let pivots = idx.default_pivots();
        let (n, jac) = normalize_pivot(&Strategy::new(vec![0.3, 0.4, 0.9]), &idx, &pivots);
        for (a, b) in n.probs.iter().zip([0.3, 0.4, 0.3]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(jac.entry(&idx, 0, 2, 0), -1.0);
        assert_eq!(jac.entry(&idx, 0, 2, 1), -1.0);
        assert_eq!(jac.entry(&idx, 0, 2, 2), 0.0);
        assert_eq!(jac.entry(&idx, 0, 0, 0), 1.0);

        let (n, _) = normalize_pivot(&Strategy::new(vec![0.7, 0.7, 0.1]), &idx, &pivots);
        assert_eq!(n.probs, vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn deterministic_update_detection() {
        let g = k2();
        let i1 = StrategyIndex::uniform(&g, 1).unwrap();
        assert!(is_deterministic_update(&i1, &Strategy::new(vec![1.0, 1.0]), 1e-6));

        let i2 = StrategyIndex::uniform(&g, 2).unwrap();
        // Row of (a,1): slots to (b,1) and (b,2).
        let mut probs = vec![0.0; 8];
        probs[0] = 0.5;
        probs[1] = 0.5;
        for p in 1..4 {
            probs[i2.row(p).start] = 1.0;
        }
        let s = Strategy::new(probs);
        assert!(!is_deterministic_update(&i2, &s, 1e-6));
        assert!(is_deterministic_update(&i2, &s, 0.6));
    }

    #[test]
    fn document_round_trip() {
        let g = gen_office(1).unwrap();
        let mem: Vec<u32> = (0..g.n_vertices()).map(|v| 1 + (v as u32 % 2)).collect();
        let idx = StrategyIndex::new(&g, &mem).unwrap();
        let s = random_strategy(&idx, 5);
        let (idx2, s2) = parse_strategy(&g, &strategy_to_json(&g, &idx, &s)).unwrap();
        assert_eq!(idx2.mem(), idx.mem());
        assert_eq!(s2, s);
    }

    #[test]
    fn document_rejects_missing_edges() {
        let g = GraphBuilder::new()
            .target("a", 1.0, 3, 1.0)
            .vertex("b")
            .vertex("c")
            .undirected("a", "b", 1)
            .undirected("b", "c", 1)
            .build()
            .unwrap();
        let text = r#"{"mem":{"a":1,"b":1,"c":1},"rows":[{"from":["a",1],"to":[["c",1,1.0]]}]}"#;
        assert!(matches!(
            parse_strategy(&g, text),
            Err(StrategyError::NoSuchSlot { .. })
        ));
        let text = r#"{"mem":{"a":1,"b":1,"c":1},"rows":[{"from":["a",2],"to":[]}]}"#;
        assert!(matches!(
            parse_strategy(&g, text),
            Err(StrategyError::MemoryOutOfRange { .. })
        ));
    }

    fn fd_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Vec<Vec<f64>> {
        let w = x.len();
        let mut jac = vec![vec![0.0; w]; w];
        for j in 0..w {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (f(&xp), f(&xm));
            for i in 0..w {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        jac
    }

    fn away_from_kinks(x: &[f64]) -> bool {
        x.iter().all(|&v| (v.abs() > 1e-3) && ((v - 1.0).abs() > 1e-3))
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    proptest! {
        #[test]
        fn full_rows_sum_to_one(x in proptest::collection::vec(-2.0f64..3.0, 1..7)) {
            let (_, idx) = star(x.len());
            let (n, _) = normalize_full(&Strategy::new(x), &idx);
            prop_assert!((n.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn full_jacobian_matches_differences(x in proptest::collection::vec(-0.5f64..1.5, 1..6)) {
            prop_assume!(away_from_kinks(&x));
            let (_, idx) = star(x.len());
            prop_assume!(x.iter().map(|&v| v.clamp(0.0, 1.0)).sum::<f64>() > 1e-3);
            let (_, jac) = normalize_full(&Strategy::new(x.clone()), &idx);
            let fd = fd_jacobian(|y| normalize_full(&Strategy::new(y.to_vec()), &idx).0.probs, &x, 1e-6);
            for i in 0..x.len() {
                for j in 0..x.len() {
                    prop_assert!(rel_close(jac.entry(&idx, 0, i, j), fd[i][j], 1e-4));
                }
            }
        }

        #[test]
        fn pivot_jacobian_matches_differences(x in proptest::collection::vec(-0.5f64..1.5, 1..6)) {
            prop_assume!(away_from_kinks(&x));
            let (_, idx) = star(x.len());
            let pivots = idx.default_pivots();
            let others: f64 = x[..x.len() - 1].iter().map(|&v| v.clamp(0.0, 1.0)).sum();
            prop_assume!((others - 1.0).abs() > 1e-3);
            let (_, jac) = normalize_pivot(&Strategy::new(x.clone()), &idx, &pivots);
            let fd = fd_jacobian(|y| normalize_pivot(&Strategy::new(y.to_vec()), &idx, &pivots).0.probs, &x, 1e-6);
            for i in 0..x.len() {
                for j in 0..x.len() {
                    prop_assert!(rel_close(jac.entry(&idx, 0, i, j), fd[i][j], 1e-4));
                }
            }
        }

        #[test]
        fn full_is_idempotent(x in proptest::collection::vec(0.0f64..1.0, 1..7)) {
            let (_, idx) = star(x.len());
            let (once, _) = normalize_full(&Strategy::new(x), &idx);
            let (twice, _) = normalize_full(&once, &idx);
            for (a, b) in once.probs.iter().zip(&twice.probs) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn pivot_fixes_normalized_rows(seed in any::<u64>(), w in 1usize..6) {
            let (_, idx) = star(w);
            let s = random_strategy(&idx, seed);
            let (n, _) = normalize_pivot(&s, &idx, &idx.default_pivots());
            for (a, b) in s.probs.iter().zip(&n.probs) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
