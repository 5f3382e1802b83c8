//! JSON reports for evaluations and optimization runs.

use serde::Serialize;

use crate::evaluator::{support_conditions, Candidate, ProtectionTable, RvalReport};
use crate::graph::PatrollingGraph;
use crate::optimizer::BestResult;
use crate::strategy::{Strategy, StrategyDocument, StrategyIndex};

/// Candidates listed in an evaluation report.
pub const REPORTED_CANDIDATES: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct EdgeRef(pub (String, u32), pub (String, u32));

#[derive(Debug, Clone, Serialize)]
pub struct CandidateDoc {
    pub edge: EdgeRef,
    pub target: String,
    pub loss: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WorstCaseDoc {
    pub edge: EdgeRef,
    pub target: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchStatsDoc {
    pub lambda_max: usize,
    pub heap_peak: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub rval: f64,
    pub worst_case: WorstCaseDoc,
    pub candidates: Vec<CandidateDoc>,
    pub stats: SearchStatsDoc,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub fn edge_ref(g: &PatrollingGraph, index: &StrategyIndex, slot: usize) -> EdgeRef {
    let s = index.slot(slot);
    let (a, b) = (index.pairs()[s.from], index.pairs()[s.to]);
    EdgeRef(
        (g.id(a.vertex).to_string(), a.memory),
        (g.id(b.vertex).to_string(), b.memory),
    )
}

fn candidate_doc(g: &PatrollingGraph, index: &StrategyIndex, c: &Candidate) -> CandidateDoc {
    CandidateDoc {
        edge: edge_ref(g, index, c.slot),
        target: g.id(c.target).to_string(),
        loss: c.loss,
    }
}

impl EvaluationReport {
    /// The worst candidates come first; ties keep slot-then-target order.
    pub fn new(
        g: &PatrollingGraph,
        index: &StrategyIndex,
        sigma: &Strategy,
        table: &ProtectionTable,
        report: &RvalReport,
        epsilon_support: f64,
    ) -> Self {
        let mut cands = report.per_candidate.clone();
        cands.sort_by(|a, b| b.loss.total_cmp(&a.loss));
        cands.truncate(REPORTED_CANDIDATES);

        let cond = support_conditions(index, sigma, epsilon_support);
        let mut warnings = Vec::new();
        if !cond.support_strongly_connected {
            warnings.push("supported pairs are not strongly connected; rval is a lower bound".to_string());
        }
        if !cond.deterministic_update {
            warnings.push("strategy is not deterministic-update; rval is a lower bound".to_string());
        }

        Self {
            rval: report.value,
            worst_case: WorstCaseDoc {
                edge: edge_ref(g, index, report.worst_case.slot),
                target: g.id(report.worst_case.target).to_string(),
            },
            candidates: cands.iter().map(|c| candidate_doc(g, index, c)).collect(),
            stats: SearchStatsDoc {
                lambda_max: table.lambda_max(),
                heap_peak: table.heap_peak(),
            },
            warnings,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BestRunDoc {
    pub value: f64,
    pub strategy: StrategyDocument,
    pub iters: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResultDoc {
    pub best: BestRunDoc,
    pub all_values: Vec<f64>,
    pub close_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl RunResultDoc {
    /// `wall_time_s` is only set when `with_timing`, keeping the document
    /// byte-reproducible otherwise.
    pub fn new(g: &PatrollingGraph, index: &StrategyIndex, result: &BestResult, wall_time_s: Option<f64>) -> Self {
        Self {
            best: BestRunDoc {
                value: result.best.final_value,
                strategy: StrategyDocument::from_strategy(g, index, &result.best.final_strategy),
                iters: result.best.iterations,
            },
            all_values: result.all_values.clone(),
            close_fraction: result.close_fraction,
            wall_time_s,
        }
    }
}
