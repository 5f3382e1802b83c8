use crate::graph::PatrollingGraph;
use crate::strategy::{Strategy, StrategyIndex};

use super::search::ROW_SUM_TOL;
use super::EvalError;

/// Dense time-layer evaluation of every target at once.
///
/// Cell `(t, q, k)` of `layers` holds the summed defended value of all paths
/// from pair `q` to target `k` taking exactly `t` time units. Targets sit
/// innermost so the recurrences run over contiguous slices.
#[derive(Debug, Clone)]
pub struct LayeredTable {
    targets: Vec<usize>,
    n_pairs: usize,
    horizon: u32,
    budgets: Vec<u32>,
    /// `coef[q * k_len + k]`: detection-miss factor for paths leaving pair `q`.
    coef: Vec<f64>,
    slot_to: Vec<usize>,
    slot_time: Vec<u32>,
    incoming: Incoming,
    layers: Vec<f64>,
    /// `values[s * k_len + k]`.
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct InSlot {
    slot: usize,
    from: usize,
    time: u32,
}

/// Entering slots grouped by head pair.
#[derive(Debug, Clone)]
struct Incoming {
    offsets: Vec<usize>,
    list: Vec<InSlot>,
}

impl Incoming {
    fn new(g: &PatrollingGraph, index: &StrategyIndex) -> Self {
        let mut offsets = Vec::with_capacity(index.n_pairs() + 1);
        let mut list = Vec::with_capacity(index.n_slots());
        offsets.push(0);
        for q in 0..index.n_pairs() {
            for &s in index.in_slots(q) {
                let slot = index.slot(s);
                list.push(InSlot {
                    slot: s,
                    from: slot.from,
                    time: g.edge(slot.edge).time,
                });
            }
            offsets.push(list.len());
        }
        Self { offsets, list }
    }

    #[inline]
    fn of(&self, q: usize) -> &[InSlot] {
        &self.list[self.offsets[q]..self.offsets[q + 1]]
    }
}

pub fn layered_values(g: &PatrollingGraph, index: &StrategyIndex, sigma: &Strategy) -> Result<LayeredTable, EvalError> {
    sigma.check_normalized(g, index, ROW_SUM_TOL)?;
    let targets = g.targets().to_vec();
    let kl = targets.len();
    let np = index.n_pairs();
    let horizon = g.d_max();
    let budgets: Vec<u32> = targets
        .iter()
        .map(|&tau| g.target(tau).expect("target").attack_time)
        .collect();

    let mut coef = vec![1.0; np * kl];
    let mut layers = vec![0.0; (horizon as usize + 1) * np * kl];
    for (k, &tau) in targets.iter().enumerate() {
        let t = g.target(tau).expect("target");
        for q in index.pairs_of(tau) {
            coef[q * kl + k] = 1.0 - t.detection;
            layers[q * kl + k] = t.cost * t.detection;
        }
    }
    let slot_to: Vec<usize> = index.slots().iter().map(|s| s.to).collect();
    let slot_time: Vec<u32> = index.slots().iter().map(|s| g.edge(s.edge).time).collect();

    // W[t][p] = coef[p] * sum over slots s = (p -> q) of sigma(s) * W[t - time(s)][q]
    let mut acc = vec![0.0; kl];
    let stride = np * kl;
    for t in 1..=horizon {
        let (done, rest) = layers.split_at_mut(t as usize * stride);
        let row_out = &mut rest[..stride];
        for p in 0..np {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for s in index.row(p) {
                let prob = sigma.probs[s];
                let dt = slot_time[s];
                if prob == 0.0 || dt > t {
                    continue;
                }
                let base = (t - dt) as usize * stride + slot_to[s] * kl;
                for (a, w) in acc.iter_mut().zip(&done[base..base + kl]) {
                    *a += prob * w;
                }
            }
            let out = &mut row_out[p * kl..(p + 1) * kl];
            for ((o, a), c) in out.iter_mut().zip(&acc).zip(&coef[p * kl..(p + 1) * kl]) {
                *o = a * c;
            }
        }
    }

    // P(s, k) = sum of W[t][to(s)][k] over t <= budget_k - time(s)
    let mut cum = layers.clone();
    for t in 1..=horizon as usize {
        let (prev, cur) = cum.split_at_mut(t * stride);
        for (c, p) in cur[..stride].iter_mut().zip(&prev[(t - 1) * stride..]) {
            *c += p;
        }
    }
    let mut values = vec![0.0; index.n_slots() * kl];
    for s in 0..index.n_slots() {
        for (k, &b) in budgets.iter().enumerate() {
            if slot_time[s] <= b {
                values[s * kl + k] = cum[(b - slot_time[s]) as usize * stride + slot_to[s] * kl + k];
            }
        }
    }

    Ok(LayeredTable {
        targets,
        n_pairs: np,
        horizon,
        budgets,
        coef,
        slot_to,
        slot_time,
        incoming: Incoming::new(g, index),
        layers,
        values,
    })
}

impl LayeredTable {
    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn value(&self, slot: usize, target: usize) -> f64 {
        self.values[slot * self.targets.len() + target]
    }

    /// Gradient over slot probabilities of `sum_k w_k * P(slot_k, target_k)`
    /// for `weights = [(slot, target ordinal, w)]`.
    pub fn adjoint_gradient(&self, sigma: &Strategy, weights: &[(usize, usize, f64)]) -> Vec<f64> {
        let kl = self.targets.len();
        let np = self.n_pairs;
        let stride = np * kl;
        let horizon = self.horizon as usize;
        let n_slots = self.slot_to.len();

        // Direct sensitivity of the weighted sum to W[t][q][k]: seeds placed
        // at the last contributing layer, then summed downwards.
        let mut adj = vec![0.0; (horizon + 1) * stride];
        for &(s, k, w) in weights {
            let (dt, b) = (self.slot_time[s], self.budgets[k]);
            if dt <= b {
                adj[(b - dt) as usize * stride + self.slot_to[s] * kl + k] += w;
            }
        }
        for t in (0..horizon).rev() {
            let (cur, next) = adj.split_at_mut((t + 1) * stride);
            for (c, n) in cur[t * stride..].iter_mut().zip(&next[..stride]) {
                *c += n;
            }
        }

        // Reverse pass in decreasing t. `adj` holds A[t] * coef once layer t
        // is finished, which is what both the propagation and gradient need.
        let mut grad = vec![0.0; n_slots];
        for t in (0..=horizon).rev() {
            let (lower, upper) = adj.split_at_mut((t + 1) * stride);
            let cur = &mut lower[t * stride..];
            for q in 0..np {
                let w_q = &self.layers[t * stride + q * kl..t * stride + (q + 1) * kl];
                let a_q = &mut cur[q * kl..(q + 1) * kl];
                for e in self.incoming.of(q) {
                    let arrival = t + e.time as usize;
                    if arrival > horizon {
                        continue;
                    }
                    let base = (arrival - t - 1) * stride + e.from * kl;
                    let up = &upper[base..base + kl];
                    let prob = sigma.probs[e.slot];
                    let mut gsum = 0.0;
                    for ((a, u), w) in a_q.iter_mut().zip(up).zip(w_q) {
                        *a += prob * u;
                        gsum += u * w;
                    }
                    grad[e.slot] += gsum;
                }
                for (a, c) in a_q.iter_mut().zip(&self.coef[q * kl..(q + 1) * kl]) {
                    *a *= c;
                }
            }
        }
        grad
    }
}
