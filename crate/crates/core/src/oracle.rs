//! Independent validators for the evaluator: exhaustive path enumeration,
//! central finite differences and Monte-Carlo playouts.
//!
//! Nothing here shares code with the evaluator's search; the oracles walk
//! the strategy forwards from the observed slot, exactly as the defender
//! would.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::evaluator::{eval_term, EvalError};
use crate::graph::PatrollingGraph;
use crate::seeds::derive_seed;
use crate::strategy::{Strategy, StrategyIndex};

/// Enumeration aborts beyond this many explored paths.
pub const PATH_LIMIT: usize = 10_000_000;

const MC_BATCH: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("path enumeration exceeded the size limit of {0} paths")]
    TooManyPaths(usize),
    #[error("vertex {0} is not a target")]
    NotATarget(usize),
    #[error("function value is not finite at slot {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// An eligible path from the head pair of a slot to the target.
#[derive(Debug, Clone, PartialEq)]
pub struct EligiblePath {
    pub pairs: Vec<usize>,
    pub probability: f64,
    /// Visits to the target along the path, the final one included.
    pub visits: u32,
    /// Walk time including the observed slot's edge.
    pub time: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathSet {
    pub paths: Vec<EligiblePath>,
}

/// Depth-first walk over every eligible path that starts at the head pair of
/// `slot` and arrives at `target` within its attack time. With `eps` set,
/// only slots with probability above it are followed; without, every slot is,
/// whatever its sign. Calls `visit` on each path ending at the target.
fn walk_paths(
    g: &PatrollingGraph,
    index: &StrategyIndex,
    sigma: &Strategy,
    slot: usize,
    target: usize,
    eps: Option<f64>,
    limit: usize,
    mut visit: impl FnMut(&[usize], f64, u32, u32),
) -> Result<(), OracleError> {
    let budget = g.target(target).ok_or(OracleError::NotATarget(target))?.attack_time;
    let first = index.slot(slot);
    let start_time = g.edge(first.edge).time;
    if start_time > budget {
        return Ok(());
    }

    // (pair, time, probability, visits, depth) with an explicit path buffer.
    let mut stack = vec![(first.to, start_time, 1.0f64, 0u32, 0usize)];
    let mut path: Vec<usize> = Vec::new();
    let mut explored = 0usize;
    while let Some((pair, time, prob, visits, depth)) = stack.pop() {
        explored += 1;
        if explored > limit {
            return Err(OracleError::TooManyPaths(limit));
        }
        path.truncate(depth);
        path.push(pair);
        let vertex = index.pairs()[pair].vertex;
        let visits = visits + (vertex == target) as u32;
        if vertex == target {
            visit(&path, prob, visits, time);
        }
        for s in index.row(pair).rev() {
            let p = sigma.probs[s];
            if eps.is_some_and(|eps| !(p > eps)) {
                continue;
            }
            let next = index.slot(s);
            let t = time + g.edge(next.edge).time;
            if t <= budget {
                stack.push((next.to, t, prob * p, visits, depth + 1));
            }
        }
    }
    Ok(())
}

pub fn enumerate_paths(
    g: &PatrollingGraph,
    index: &StrategyIndex,
    sigma: &Strategy,
    slot: usize,
    target: usize,
    eps: f64,
) -> Result<PathSet, OracleError> {
    let mut set = PathSet::default();
    walk_paths(
        g,
        index,
        sigma,
        slot,
        target,
        Some(eps),
        PATH_LIMIT,
        |pairs, probability, visits, time| {
            set.paths.push(EligiblePath {
                pairs: pairs.to_vec(),
                probability,
                visits,
                time,
            })
        },
    )?;
    Ok(set)
}

/// Protection at `target` after observing `slot`, summed path by path.
///
/// Works on raw (unnormalized) slot values and follows zero and negative
/// entries too, so it is a polynomial in them.
pub fn brute_protection(
    g: &PatrollingGraph,
    index: &StrategyIndex,
    sigma: &Strategy,
    slot: usize,
    target: usize,
) -> Result<f64, OracleError> {
    brute_protection_limited(g, index, sigma, slot, target, PATH_LIMIT)
}

pub fn brute_protection_limited(
    g: &PatrollingGraph,
    index: &StrategyIndex,
    sigma: &Strategy,
    slot: usize,
    target: usize,
    limit: usize,
) -> Result<f64, OracleError> {
    let t = *g.target(target).ok_or(OracleError::NotATarget(target))?;
    let mut total = 0.0;
    let mut err = None;
    walk_paths(
        g,
        index,
        sigma,
        slot,
        target,
        None,
        limit,
        |_, prob, visits, _| match eval_term(t.cost, t.detection, visits) {
            Ok(e) => total += prob * e,
            Err(e) => err = Some(e),
        },
    )?;
    match err {
        Some(e) => Err(e.into()),
        None => Ok(total),
    }
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h` in raw coordinates.
pub fn fd_gradient(mut f: impl FnMut(&Strategy) -> f64, sigma: &Strategy, h: f64) -> Result<Vec<f64>, OracleError> {
    let mut x = sigma.clone();
    let mut grad = Vec::with_capacity(sigma.len());
    for i in 0..sigma.len() {
        let orig = x.probs[i];
        x.probs[i] = orig + h;
        let fp = f(&x);
        x.probs[i] = orig - h;
        let fm = f(&x);
        x.probs[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(OracleError::NonFinite(i));
        }
        grad.push((fp - fm) / (2.0 * h));
    }
    Ok(grad)
}

/// Monte-Carlo estimate of the protection at `target` after observing `slot`.
///
/// Each walk starts at the slot's head pair with the slot's edge time already
/// elapsed, samples successors from the strategy, and flips an independent
/// detection coin on every arrival at the target. A walk scores the target's
/// cost on its first detection within the attack time and 0 otherwise.
/// Returns the sample mean and its standard error.
pub fn mc_protection(
    g: &PatrollingGraph,
    index: &StrategyIndex,
    sigma: &Strategy,
    slot: usize,
    target: usize,
    n: usize,
    seed: u64,
) -> Result<(f64, f64), OracleError> {
    let t = *g.target(target).ok_or(OracleError::NotATarget(target))?;
    let n_batches = n.div_ceil(MC_BATCH);
    let sums: Vec<(f64, f64)> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let size = MC_BATCH.min(n - b * MC_BATCH);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, b as u64));
            let mut hits = 0usize;
            for _ in 0..size {
                if playout(g, index, sigma, slot, target, t.attack_time, t.detection, &mut rng) {
                    hits += 1;
                }
            }
            let s = hits as f64 * t.cost;
            (s, s * t.cost)
        })
        .collect();
    let (sum, sum_sq) = sums.into_iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 {
        ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok((mean, (var / nf).sqrt()))
}

#[allow(clippy::too_many_arguments)]
fn playout(
    g: &PatrollingGraph,
    index: &StrategyIndex,
    sigma: &Strategy,
    slot: usize,
    target: usize,
    budget: u32,
    detection: f64,
    rng: &mut ChaCha8Rng,
) -> bool {
    let first = index.slot(slot);
    let mut time = g.edge(first.edge).time;
    let mut pair = first.to;
    loop {
        if time > budget {
            return false;
        }
        if index.pairs()[pair].vertex == target && rng.random::<f64>() < detection {
            return true;
        }
        let row = index.row(pair);
        if row.is_empty() {
            return false;
        }
        let r: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = None;
        for s in row.clone() {
            let p = sigma.probs[s];
            if p <= 0.0 {
                continue;
            }
            acc += p;
            chosen = Some(s);
            if r < acc {
                break;
            }
        }
        let Some(s) = chosen else { return false };
        let next = index.slot(s);
        time += g.edge(next.edge).time;
        pair = next.to;
    }
}
