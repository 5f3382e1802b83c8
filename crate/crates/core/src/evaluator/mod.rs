//! Strategy evaluation: protection values, their gradients and the
//! worst-case value of a regular strategy.
//!
//! Two routes compute the same protection values. [`protection_table`] runs
//! the backward heap search and carries a forward-mode gradient for every
//! `(slot, target)` entry. [`layered_values`] runs the same recurrence over
//! dense time layers without gradients, and [`LayeredTable::adjoint_gradient`]
//! differentiates a weighted sum of entries in reverse mode. The optimizer
//! only ever needs such a weighted sum, so it uses the second route.

mod layered;
mod rval;
mod search;

use thiserror::Error;

use crate::strategy::StrategyError;

pub use layered::{layered_values, LayeredTable};
pub use rval::{
    evaluate, hard_value, hopeless_slots, soft_value_gradient, soft_weights, support_conditions, Candidate, Evaluation,
    GradientRoute, ProtectionValues, RvalReport, SofteningConfig, SupportConditions,
};
pub use search::{
    protection_table, protection_table_with, ProtectionEntry, ProtectionTable, SearchOptions, TargetStats,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("invalid evaluation term: {0}")]
    Domain(String),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("no slot has probability at or above the support threshold {0}")]
    EmptySupport(f64),
    #[error("invalid softening configuration: {0}")]
    Softening(String),
}

/// Expected value defended at a target when the `visits`-th arrival is the
/// detection trial: `alpha * (1 - beta)^(visits - 1) * beta`.
pub fn eval_term(alpha: f64, beta: f64, visits: u32) -> Result<f64, EvalError> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(EvalError::Domain(format!("alpha must be positive, got {alpha}")));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(EvalError::Domain(format!("beta out of range (0,1], got {beta}")));
    }
    if visits == 0 {
        return Err(EvalError::Domain("visits must be at least 1".into()));
    }
    // powi(0) is 1, which covers the 0^0 case at beta = 1.
    Ok(alpha * (1.0 - beta).powi(visits as i32 - 1) * beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_term_examples() {
        assert_eq!(eval_term(100.0, 1.0, 1).unwrap(), 100.0);
        assert_eq!(eval_term(100.0, 1.0, 2).unwrap(), 0.0);
        assert_eq!(eval_term(100.0, 0.5, 2).unwrap(), 25.0);
        assert!((eval_term(200.0, 0.9, 1).unwrap() - 180.0).abs() < 1e-12);
    }

    #[test]
    fn eval_term_domain() {
        assert!(eval_term(0.0, 1.0, 1).is_err());
        assert!(eval_term(1.0, 0.0, 1).is_err());
        assert!(eval_term(1.0, 1.5, 1).is_err());
        assert!(eval_term(1.0, 0.5, 0).is_err());
    }
}
