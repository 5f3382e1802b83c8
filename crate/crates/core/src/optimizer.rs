//! Gradient ascent on regular strategies and the multi-restart driver.
//!
//! Each iteration normalizes the raw iterate, evaluates the worst-case value
//! and its softened gradient, pulls the gradient back through the
//! normalization, and steps by `step_scale * (1 - delta)^k`. The gradient is
//! taken of the value divided by `alpha_max`, so step sizes are in
//! probability units regardless of the cost scale.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::evaluator::{evaluate, EvalError, GradientRoute, SofteningConfig};
use crate::graph::PatrollingGraph;
use crate::seeds::derive_seed;
use crate::strategy::{normalize_full, normalize_pivot, random_strategy, NormJacobian, Strategy, StrategyIndex};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptError {
    #[error("invalid optimizer configuration: {0}")]
    Config(String),
    #[error("ascent direction has a non-finite entry at slot {0}")]
    NonFinite(usize),
    #[error("ascent direction has {got} entries, strategy has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("at least one restart is required")]
    NoRestarts,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    Full,
    Pivot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizerConfig {
    /// Step decay: iteration `k` steps by `(1 - delta)^k`.
    pub delta: f64,
    /// A run stops once the softened value has failed to improve on the
    /// previous iterate by more than this for `patience` consecutive iterations.
    pub threshold: f64,
    pub patience: usize,
    pub max_iters: usize,
    pub softening: SofteningConfig,
    pub normalization: Normalization,
    pub step_scale: f64,
    pub route: GradientRoute,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            delta: 0.002,
            threshold: 1e-3,
            patience: 5,
            max_iters: 2000,
            softening: SofteningConfig::default(),
            normalization: Normalization::Full,
            step_scale: 1.0,
            route: GradientRoute::Adjoint,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptError> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(OptError::Config(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        if !(self.threshold > 0.0) || !self.threshold.is_finite() {
            return Err(OptError::Config(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        if !(self.step_scale > 0.0) || !self.step_scale.is_finite() {
            return Err(OptError::Config(format!(
                "step_scale must be positive, got {}",
                self.step_scale
            )));
        }
        if self.max_iters == 0 {
            return Err(OptError::Config("max_iters must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(OptError::Config("patience must be at least 1".into()));
        }
        self.softening.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptRun {
    /// Best-valued normalized iterate.
    pub final_strategy: Strategy,
    pub final_value: f64,
    pub trace: Vec<(usize, f64)>,
    pub iterations: usize,
    pub wall_time: Duration,
    /// Forward-route evaluations whose heap exceeded `pairs * lambda` items.
    pub heap_bound_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResult {
    pub best: OptRun,
    pub best_restart: usize,
    pub all_values: Vec<f64>,
    pub all_iterations: Vec<usize>,
    pub all_wall_times: Vec<Duration>,
    /// Fraction of restarts within 90% of the best value.
    pub close_fraction: f64,
    /// Summed over all restarts.
    pub heap_bound_violations: usize,
}

/// `sigma + step_scale * (1 - delta)^k * xi`, left unnormalized.
pub fn ascent_step(sigma: &Strategy, xi: &[f64], k: usize, cfg: &OptimizerConfig) -> Result<Strategy, OptError> {
    if xi.len() != sigma.len() {
        return Err(OptError::Dimension {
            expected: sigma.len(),
            got: xi.len(),
        });
    }
    if let Some(i) = xi.iter().position(|x| !x.is_finite()) {
        return Err(OptError::NonFinite(i));
    }
    let rate = cfg.step_scale * (1.0 - cfg.delta).powi(k as i32);
    Ok(Strategy::new(
        sigma.probs.iter().zip(xi).map(|(s, x)| s + rate * x).collect(),
    ))
}

fn normalize(
    sigma: &Strategy,
    index: &StrategyIndex,
    cfg: &OptimizerConfig,
    pivots: &[usize],
) -> (Strategy, NormJacobian) {
    match cfg.normalization {
        Normalization::Full => normalize_full(sigma, index),
        Normalization::Pivot => normalize_pivot(sigma, index, pivots),
    }
}

/// One gradient-ascent run from `sigma0` (any real vector of slot dimension).
pub fn optimize(
    g: &PatrollingGraph,
    index: &StrategyIndex,
    sigma0: &Strategy,
    cfg: &OptimizerConfig,
) -> Result<OptRun, OptError> {
    cfg.validate()?;
    if sigma0.len() != index.n_slots() {
        return Err(OptError::Dimension {
            expected: index.n_slots(),
            got: sigma0.len(),
        });
    }
    let start = Instant::now();
    let pivots = index.default_pivots();
    let scale = 1.0 / g.alpha_max();
    let n_pairs = index.n_pairs();

    let mut raw = sigma0.clone();
    let mut trace = Vec::new();
    let mut best: Option<(f64, Strategy)> = None;
    let mut prev: Option<f64> = None;
    let mut stale = 0;
    let mut heap_bound_violations = 0;

    for k in 0..cfg.max_iters {
        let (sigma, jac) = normalize(&raw, index, cfg, &pivots);
        let eval = evaluate(g, index, &sigma, &cfg.softening, cfg.route)?;
        if let Some(stats) = &eval.stats {
            heap_bound_violations += stats.iter().filter(|s| s.heap_peak > n_pairs * s.lambda).count();
        }
        trace.push((k, eval.value));

        // Progress is judged on the softened objective being ascended: the
        // hard value sits still while mass drains from hopeless slots.
        match prev {
            Some(p) if eval.soft_value - p <= cfg.threshold => stale += 1,
            _ => stale = 0,
        }
        prev = Some(eval.soft_value);
        if best.as_ref().is_none_or(|b| eval.value > b.0) {
            best = Some((eval.value, sigma.clone()));
        }
        // No strategy can do better than the largest target cost.
        if stale >= cfg.patience || eval.value >= g.alpha_max() {
            break;
        }

        let mut xi = jac.pull_back(index, &eval.gradient);
        xi.iter_mut().for_each(|x| *x *= scale);
        raw = ascent_step(&sigma, &xi, k, cfg)?;
    }

    let (final_value, final_strategy) = best.expect("at least one iteration");
    Ok(OptRun {
        final_strategy,
        final_value,
        iterations: trace.len(),
        trace,
        wall_time: start.elapsed(),
        heap_bound_violations,
    })
}

/// Runs [`optimize`] from `restarts` random strategies and keeps the best.
/// Restart `i` starts from `random_strategy(index, derive_seed(seed, i))`.
pub fn regstar(
    g: &PatrollingGraph,
    index: &StrategyIndex,
    restarts: usize,
    cfg: &OptimizerConfig,
    seed: u64,
) -> Result<BestResult, OptError> {
    if restarts == 0 {
        return Err(OptError::NoRestarts);
    }
    cfg.validate()?;
    let runs: Vec<OptRun> = (0..restarts)
        .into_par_iter()
        .map(|i| optimize(g, index, &random_strategy(index, derive_seed(seed, i as u64)), cfg))
        .collect::<Result<_, _>>()?;
    Ok(aggregate(runs))
}

fn aggregate(runs: Vec<OptRun>) -> BestResult {
    let all_values: Vec<f64> = runs.iter().map(|r| r.final_value).collect();
    let all_iterations = runs.iter().map(|r| r.iterations).collect();
    let all_wall_times = runs.iter().map(|r| r.wall_time).collect();
    let heap_bound_violations = runs.iter().map(|r| r.heap_bound_violations).sum();
    let mut best_restart = 0;
    for (i, &v) in all_values.iter().enumerate() {
        if v > all_values[best_restart] {
            best_restart = i;
        }
    }
    let best_value = all_values[best_restart];
    let close = all_values.iter().filter(|&&v| v >= 0.9 * best_value).count();
    let close_fraction = close as f64 / all_values.len() as f64;
    let best = runs.into_iter().nth(best_restart).expect("best restart exists");
    BestResult {
        best,
        best_restart,
        all_values,
        all_iterations,
        all_wall_times,
        close_fraction,
        heap_bound_violations,
    }
}
