//! Synthesis of finite-memory defender strategies for adversarial patrolling
//! games on graphs with timed edges and imperfect intrusion detection.
//!
//! The pipeline: build a [`PatrollingGraph`], enumerate eligible pairs and
//! slots with a [`StrategyIndex`], evaluate a [`Strategy`] with the
//! [`evaluator`], and improve it with [`optimizer::regstar`].

pub mod evaluator;
pub mod generators;
pub mod graph;
pub mod optimizer;
pub mod oracle;
pub mod report;
pub mod seeds;
pub mod sparse;
pub mod strategy;

pub use evaluator::{
    eval_term, evaluate, hard_value, protection_table, soft_value_gradient, EvalError, GradientRoute, ProtectionTable,
    RvalReport, SofteningConfig,
};
pub use generators::{
    gen_grid, gen_office, gen_office_with, gen_points_complete, GridSpec, OfficeOverrides, PointsSpec,
};
pub use graph::{parse_graph, GraphBuilder, GraphError, GraphStats, PatrollingGraph, Target};
pub use optimizer::{ascent_step, optimize, regstar, BestResult, Normalization, OptRun, OptimizerConfig};
pub use strategy::{
    normalize_full, normalize_pivot, random_strategy, NormJacobian, Strategy, StrategyError, StrategyIndex,
};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
