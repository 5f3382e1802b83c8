//! Backward min-heap search over time layers with forward-mode gradients.
//!
//! For each target the search starts at every pair of the target with time 0
//! and value `alpha * beta`, and walks slots backwards. A heap item
//! `(pair, t, p, grad)` stands for a set of paths that start at `pair`, end
//! at the target and take `t` time units; `p` is their summed
//! probability-weighted defended value and `grad` its gradient over slot
//! probabilities. All items of the smallest `t` are popped together, summed
//! per pair, credited to every entering slot that fits the attack time, and
//! extended backwards through those slots.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rayon::prelude::*;

use crate::graph::PatrollingGraph;
use crate::sparse::SparseGrad;
use crate::strategy::{Strategy, StrategyIndex};

use super::EvalError;

/// Tolerance on row sums accepted by the evaluators.
pub(crate) const ROW_SUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    /// Merge items with identical `(pair, t)` on insert.
    pub coalesce: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { coalesce: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProtectionEntry {
    pub value: f64,
    pub grad: SparseGrad,
}

/// Search instrumentation for one target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetStats {
    pub target: usize,
    /// Number of distinct time layers processed.
    pub lambda: usize,
    pub heap_peak: usize,
    pub popped: usize,
    /// Processed layer times, in processing order.
    pub layers: Vec<u32>,
}

/// Protection values and gradients indexed by `(slot, target ordinal)`.
/// Absent entries mean no path fits the attack time.
#[derive(Debug, Clone)]
pub struct ProtectionTable {
    targets: Vec<usize>,
    entries: Vec<Vec<Option<ProtectionEntry>>>,
    stats: Vec<TargetStats>,
}

impl ProtectionTable {
    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn entry(&self, slot: usize, target: usize) -> Option<&ProtectionEntry> {
        self.entries[target][slot].as_ref()
    }

    pub fn value(&self, slot: usize, target: usize) -> f64 {
        self.entry(slot, target).map_or(0.0, |e| e.value)
    }

    pub fn grad(&self, slot: usize, target: usize) -> Option<&SparseGrad> {
        self.entry(slot, target).map(|e| &e.grad)
    }

    pub fn stats(&self) -> &[TargetStats] {
        &self.stats
    }

    pub fn lambda_max(&self) -> usize {
        self.stats.iter().map(|s| s.lambda).max().unwrap_or(0)
    }

    pub fn heap_peak(&self) -> usize {
        self.stats.iter().map(|s| s.heap_peak).max().unwrap_or(0)
    }

    /// Whether every target's heap peak stayed within `bound_per_layer * lambda`.
    pub fn heap_within(&self, bound_per_layer: usize) -> bool {
        self.stats.iter().all(|s| s.heap_peak <= bound_per_layer * s.lambda)
    }
}

pub fn protection_table(
    g: &PatrollingGraph,
    index: &StrategyIndex,
    sigma: &Strategy,
) -> Result<ProtectionTable, EvalError> {
    protection_table_with(g, index, sigma, SearchOptions::default())
}

pub fn protection_table_with(
    g: &PatrollingGraph,
    index: &StrategyIndex,
    sigma: &Strategy,
    opts: SearchOptions,
) -> Result<ProtectionTable, EvalError> {
    sigma.check_normalized(g, index, ROW_SUM_TOL)?;
    let results: Vec<_> = g
        .targets()
        .par_iter()
        .map(|&tau| search_target(g, index, sigma, tau, opts))
        .collect();
    let (entries, stats) = results.into_iter().unzip();
    Ok(ProtectionTable {
        targets: g.targets().to_vec(),
        entries,
        stats,
    })
}

struct Item {
    p: f64,
    grad: SparseGrad,
}

/// Heap of items keyed by `(t, pair)`; with coalescing, one live item per key.
struct LayerHeap {
    heap: BinaryHeap<Reverse<(u32, usize, usize)>>,
    items: Vec<Option<Item>>,
    live: HashMap<(u32, usize), usize>,
    coalesce: bool,
    peak: usize,
}

impl LayerHeap {
    fn new(coalesce: bool) -> Self {
        Self {
            heap: BinaryHeap::new(),
            items: Vec::new(),
            live: HashMap::new(),
            coalesce,
            peak: 0,
        }
    }

    fn insert(&mut self, pair: usize, t: u32, p: f64, grad: SparseGrad) {
        if self.coalesce {
            if let Some(&k) = self.live.get(&(t, pair)) {
                let item = self.items[k].as_mut().expect("live item");
                item.p += p;
                item.grad.add_scaled(&grad, 1.0);
                return;
            }
            self.live.insert((t, pair), self.items.len());
        }
        self.heap.push(Reverse((t, pair, self.items.len())));
        self.items.push(Some(Item { p, grad }));
        self.peak = self.peak.max(self.heap.len());
    }

    fn peek_time(&self) -> Option<u32> {
        self.heap.peek().map(|Reverse((t, _, _))| *t)
    }

    fn pop(&mut self) -> Option<(usize, u32, Item)> {
        let Reverse((t, pair, k)) = self.heap.pop()?;
        if self.coalesce {
            self.live.remove(&(t, pair));
        }
        Some((pair, t, self.items[k].take().expect("item popped once")))
    }
}

fn search_target(
    g: &PatrollingGraph,
    index: &StrategyIndex,
    sigma: &Strategy,
    tau: usize,
    opts: SearchOptions,
) -> (Vec<Option<ProtectionEntry>>, TargetStats) {
    let target = g.target(tau).expect("target vertex");
    let budget = target.attack_time;
    let miss = 1.0 - target.detection;
    let n_pairs = index.n_pairs();

    let mut entries: Vec<Option<ProtectionEntry>> = vec![None; index.n_slots()];
    let mut heap = LayerHeap::new(opts.coalesce);
    for p in index.pairs_of(tau) {
        heap.insert(p, 0, target.cost * target.detection, SparseGrad::new());
    }

    let mut acc_v = vec![0.0; n_pairs];
    let mut acc_g: Vec<SparseGrad> = vec![SparseGrad::new(); n_pairs];
    let mut seen = vec![false; n_pairs];
    let mut touched = Vec::new();
    let mut layers = Vec::new();
    let mut popped = 0;

    while let Some(layer) = heap.peek_time() {
        layers.push(layer);
        while heap.peek_time() == Some(layer) {
            let (pair, _, item) = heap.pop().expect("peeked");
            popped += 1;
            if !seen[pair] {
                seen[pair] = true;
                touched.push(pair);
            }
            acc_v[pair] += item.p;
            acc_g[pair].add_scaled(&item.grad, 1.0);
        }
        touched.sort_unstable();

        for &pair in &touched {
            seen[pair] = false;
            let value = std::mem::take(&mut acc_v[pair]);
            let grad = std::mem::take(&mut acc_g[pair]);
            if value == 0.0 && grad.is_empty() {
                continue;
            }
            for &s in index.in_slots(pair) {
                let slot = index.slot(s);
                let arrival = layer + g.edge(slot.edge).time;
                if arrival > budget {
                    continue;
                }
                let entry = entries[s].get_or_insert_with(ProtectionEntry::default);
                entry.value += value;
                entry.grad.add_scaled(&grad, 1.0);

                let tail = index.pairs()[slot.from].vertex;
                let c = if tail == tau { miss } else { 1.0 };
                if c == 0.0 {
                    continue;
                }
                let prob = sigma.probs[s];
                // d(prob * value) = prob * d(value) + value * d(prob)
                let mut der = SparseGrad::new();
                der.add_scaled(&grad, prob * c);
                if value != 0.0 {
                    der.add_unit(s, value * c);
                }
                let p = value * prob * c;
                if p != 0.0 || !der.is_empty() {
                    heap.insert(slot.from, arrival, p, der);
                }
            }
        }
        touched.clear();
    }

    let stats = TargetStats {
        target: tau,
        lambda: layers.len(),
        heap_peak: heap.peak,
        popped,
        layers,
    };
    (entries, stats)
}
