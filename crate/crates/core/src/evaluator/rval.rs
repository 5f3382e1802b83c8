use serde::Serialize;

use crate::graph::PatrollingGraph;
use crate::strategy::{is_deterministic_update, Strategy, StrategyIndex};

use super::{layered_values, protection_table, EvalError, LayeredTable, ProtectionTable, TargetStats};

/// Read access to protection values by `(slot, target ordinal)`.
pub trait ProtectionValues {
    fn targets(&self) -> &[usize];
    fn value(&self, slot: usize, target: usize) -> f64;
}

impl ProtectionValues for ProtectionTable {
    fn targets(&self) -> &[usize] {
        ProtectionTable::targets(self)
    }

    fn value(&self, slot: usize, target: usize) -> f64 {
        ProtectionTable::value(self, slot, target)
    }
}

impl ProtectionValues for LayeredTable {
    fn targets(&self) -> &[usize] {
        LayeredTable::targets(self)
    }

    fn value(&self, slot: usize, target: usize) -> f64 {
        LayeredTable::value(self, slot, target)
    }
}

/// How near-worst candidates share the ascent direction.
///
/// Candidates whose loss is within `margin` of the worst loss participate,
/// weighted by `softmax(loss / temperature)`. `margin = 0` keeps only the
/// worst case. Slots with probability below `epsilon_support` count as unused.
///
/// With `drain_hopeless`, a weighted candidate whose target is out of reach
/// after its slot on every walk (see [`hopeless_slots`]) pushes the slot's
/// probability down by `w * cost`, the derivative of `cost * sigma(slot)`.
/// Its true gradient is zero, and leaving the slot is the only way to
/// improve it; without the push the ascent stalls on such plateaus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SofteningConfig {
    pub margin: f64,
    pub temperature: f64,
    pub epsilon_support: f64,
    pub drain_hopeless: bool,
}

impl Default for SofteningConfig {
    fn default() -> Self {
        Self {
            margin: 5.0,
            temperature: 1.0,
            epsilon_support: 1e-6,
            drain_hopeless: true,
        }
    }
}

impl SofteningConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.margin >= 0.0) || !self.margin.is_finite() {
            return Err(EvalError::Softening(format!(
                "margin must be finite and >= 0, got {}",
                self.margin
            )));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(EvalError::Softening(format!(
                "temperature must be finite and > 0, got {}",
                self.temperature
            )));
        }
        if !(0.0..1.0).contains(&self.epsilon_support) {
            return Err(EvalError::Softening(format!(
                "epsilon_support must lie in [0,1), got {}",
                self.epsilon_support
            )));
        }
        Ok(())
    }
}

/// One attacker option: attack `target` (vertex id) upon observing `slot`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub slot: usize,
    pub target: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RvalReport {
    pub value: f64,
    pub worst_case: Candidate,
    /// Every supported `(slot, target)` pair, in slot then target order.
    pub per_candidate: Vec<Candidate>,
}

#[inline]
fn supported(p: f64, eps: f64) -> bool {
    p > 0.0 && p >= eps
}

fn candidates<T: ProtectionValues>(
    table: &T,
    g: &PatrollingGraph,
    index: &StrategyIndex,
    sigma: &Strategy,
    eps: f64,
) -> Vec<(usize, Candidate)> {
    let mut out = Vec::new();
    for s in 0..index.n_slots() {
        if !supported(sigma.probs[s], eps) {
            continue;
        }
        for (t, &tau) in table.targets().iter().enumerate() {
            let alpha = g.target(tau).expect("target vertex").cost;
            out.push((
                t,
                Candidate {
                    slot: s,
                    target: tau,
                    loss: alpha - table.value(s, t),
                },
            ));
        }
    }
    out
}

fn worst(cands: &[(usize, Candidate)]) -> Option<(usize, Candidate)> {
    // Strict comparison keeps the lowest (slot, target) among ties.
    cands.iter().copied().fold(None, |best, c| match best {
        Some((_, b)) if c.1.loss <= b.loss => best,
        _ => Some(c),
    })
}

/// `alpha_max - max(alpha(tau) - P(e, tau))` over supported slots and all targets.
pub fn hard_value<T: ProtectionValues>(
    table: &T,
    g: &PatrollingGraph,
    index: &StrategyIndex,
    sigma: &Strategy,
    epsilon_support: f64,
) -> Result<RvalReport, EvalError> {
    let cands = candidates(table, g, index, sigma, epsilon_support);
    let (_, worst_case) = worst(&cands).ok_or(EvalError::EmptySupport(epsilon_support))?;
    Ok(RvalReport {
        value: g.alpha_max() - worst_case.loss,
        worst_case,
        per_candidate: cands.into_iter().map(|(_, c)| c).collect(),
    })
}

/// Softening weights `[(slot, target ordinal, w)]` and the hard report.
pub fn soft_weights<T: ProtectionValues>(
    table: &T,
    g: &PatrollingGraph,
    index: &StrategyIndex,
    sigma: &Strategy,
    cfg: &SofteningConfig,
) -> Result<(RvalReport, Vec<(usize, usize, f64)>), EvalError> {
    cfg.validate()?;
    let cands = candidates(table, g, index, sigma, cfg.epsilon_support);
    let (wt, worst_case) = worst(&cands).ok_or(EvalError::EmptySupport(cfg.epsilon_support))?;
    let weights = if cfg.margin == 0.0 {
        vec![(worst_case.slot, wt, 1.0)]
    } else {
        let near: Vec<_> = cands
            .iter()
            .filter(|(_, c)| c.loss >= worst_case.loss - cfg.margin)
            .collect();
        let exps: Vec<f64> = near
            .iter()
            .map(|(_, c)| ((c.loss - worst_case.loss) / cfg.temperature).exp())
            .collect();
        let z: f64 = exps.iter().sum();
        near.iter().zip(exps).map(|((t, c), e)| (c.slot, *t, e / z)).collect()
    };
    let report = RvalReport {
        value: g.alpha_max() - worst_case.loss,
        worst_case,
        per_candidate: cands.into_iter().map(|(_, c)| c).collect(),
    };
    Ok((report, weights))
}

/// Hard value and the softened ascent direction from forward-mode gradients.
pub fn soft_value_gradient(
    table: &ProtectionTable,
    g: &PatrollingGraph,
    index: &StrategyIndex,
    sigma: &Strategy,
    cfg: &SofteningConfig,
) -> Result<(f64, Vec<f64>), EvalError> {
    let (report, weights) = soft_weights(table, g, index, sigma, cfg)?;
    let mut grad = vec![0.0; index.n_slots()];
    for &(s, t, w) in &weights {
        if let Some(gr) = table.grad(s, t) {
            gr.add_to_dense(&mut grad, w);
        }
    }
    drain(table, g, index, cfg, &weights, &mut grad);
    Ok((report.value, grad))
}

/// Which gradient computation backs [`evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientRoute {
    /// Dense time layers with a reverse-mode pass over the weighted candidates.
    #[default]
    Adjoint,
    /// Heap search carrying a sparse gradient for every entry.
    Forward,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    /// Softening-weighted blend of the candidate values; equals `value`
    /// with a zero margin. Moves on plateaus where `value` does not.
    pub soft_value: f64,
    pub worst_case: Candidate,
    /// Softened ascent direction over normalized slot probabilities.
    pub gradient: Vec<f64>,
    /// Heap-search statistics, forward route only.
    pub stats: Option<Vec<TargetStats>>,
}

/// `out[k][slot]` is true when target `k` cannot be reached within its
/// attack time after taking `slot`, whatever the strategy.
pub fn hopeless_slots(g: &PatrollingGraph, index: &StrategyIndex) -> Vec<Vec<bool>> {
    g.targets()
        .iter()
        .map(|&tau| {
            let dist = times_to(g, tau);
            let budget = g.target(tau).expect("target").attack_time as u64;
            index
                .slots()
                .iter()
                .map(|s| {
                    let head = index.pairs()[s.to].vertex;
                    dist[head].is_none_or(|d| g.edge(s.edge).time as u64 + d > budget)
                })
                .collect()
        })
        .collect()
}

/// Shortest travel time from every vertex to `tau`.
fn times_to(g: &PatrollingGraph, tau: usize) -> Vec<Option<u64>> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let mut incoming = vec![Vec::new(); g.n_vertices()];
    for e in g.edges() {
        incoming[e.to].push((e.from, e.time as u64));
    }
    let mut dist = vec![None; g.n_vertices()];
    let mut heap = BinaryHeap::from([Reverse((0u64, tau))]);
    while let Some(Reverse((d, v))) = heap.pop() {
        if dist[v].is_some() {
            continue;
        }
        dist[v] = Some(d);
        for &(u, t) in &incoming[v] {
            if dist[u].is_none() {
                heap.push(Reverse((d + t, u)));
            }
        }
    }
    dist
}

fn drain<T: ProtectionValues>(
    table: &T,
    g: &PatrollingGraph,
    index: &StrategyIndex,
    cfg: &SofteningConfig,
    weights: &[(usize, usize, f64)],
    grad: &mut [f64],
) {
    // A hopeless candidate has no path at all, so its value is exactly zero.
    if !cfg.drain_hopeless || weights.iter().all(|&(s, k, _)| table.value(s, k) != 0.0) {
        return;
    }
    let hopeless = hopeless_slots(g, index);
    for &(s, k, w) in weights {
        if hopeless[k][s] {
            grad[s] -= w * g.target(g.targets()[k]).expect("target").cost;
        }
    }
}

/// `sum_c w_c * (alpha_max - loss_c)` over the weighted candidates.
fn blended_value<T: ProtectionValues>(table: &T, g: &PatrollingGraph, weights: &[(usize, usize, f64)]) -> f64 {
    let targets = g.targets();
    let loss = |s: usize, k: usize| g.target(targets[k]).expect("target").cost - table.value(s, k);
    g.alpha_max() - weights.iter().map(|&(s, k, w)| w * loss(s, k)).sum::<f64>()
}

/// Hard value and softened gradient of a normalized strategy.
pub fn evaluate(
    g: &PatrollingGraph,
    index: &StrategyIndex,
    sigma: &Strategy,
    cfg: &SofteningConfig,
    route: GradientRoute,
) -> Result<Evaluation, EvalError> {
    match route {
        GradientRoute::Adjoint => {
            let table = layered_values(g, index, sigma)?;
            let (report, weights) = soft_weights(&table, g, index, sigma, cfg)?;
            let mut gradient = table.adjoint_gradient(sigma, &weights);
            drain(&table, g, index, cfg, &weights, &mut gradient);
            Ok(Evaluation {
                value: report.value,
                soft_value: blended_value(&table, g, &weights),
                worst_case: report.worst_case,
                gradient,
                stats: None,
            })
        }
        GradientRoute::Forward => {
            let table = protection_table(g, index, sigma)?;
            let (report, weights) = soft_weights(&table, g, index, sigma, cfg)?;
            let mut gradient = vec![0.0; index.n_slots()];
            for &(s, t, w) in &weights {
                if let Some(gr) = table.grad(s, t) {
                    gr.add_to_dense(&mut gradient, w);
                }
            }
            drain(&table, g, index, cfg, &weights, &mut gradient);
            Ok(Evaluation {
                value: report.value,
                soft_value: blended_value(&table, g, &weights),
                worst_case: report.worst_case,
                gradient,
                stats: Some(table.stats().to_vec()),
            })
        }
    }
}

/// Conditions under which the worst-case value equals the value against an
/// attacker who cannot see memory elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SupportConditions {
    pub support_strongly_connected: bool,
    pub deterministic_update: bool,
}

pub fn support_conditions(index: &StrategyIndex, sigma: &Strategy, eps: f64) -> SupportConditions {
    let n = index.n_pairs();
    let mut succ = vec![Vec::new(); n];
    let mut pred = vec![Vec::new(); n];
    for (s, slot) in index.slots().iter().enumerate() {
        if supported(sigma.probs[s], eps) {
            succ[slot.from].push(slot.to);
            pred[slot.to].push(slot.from);
        }
    }
    let reaches_all = |adj: &[Vec<usize>]| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|x| x)
    };
    SupportConditions {
        support_strongly_connected: n > 0 && reaches_all(&succ) && reaches_all(&pred),
        deterministic_update: is_deterministic_update(index, sigma, eps),
    }
}
