//! `check`: compares the search evaluator with path enumeration, finite
//! differences of the enumeration, and random playouts.

use patrol_core::oracle::{brute_protection_limited, fd_gradient, mc_protection, OracleError};
use patrol_core::protection_table;
use patrol_core::report::{edge_ref, EdgeRef};
use patrol_core::seeds::derive_seed;
use patrol_core::strategy::parse_strategy;
use serde::Serialize;

use crate::args::CheckArgs;
use crate::{emit, read_graph, read_text, to_json, CliError, Result};

/// Fraction of sampled entries whose playout mean must land within four
/// standard errors of the computed value.
pub const MC_PASS_FRACTION: f64 = 0.96;

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub entries: usize,
    pub max_value_error: f64,
    pub max_gradient_rel_error: f64,
    pub mc: Vec<McEntry>,
    pub mc_within_4se: f64,
    pub passed: bool,
    pub violations: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct McEntry {
    pub edge: EdgeRef,
    pub target: String,
    pub value: f64,
    pub mean: f64,
    pub stderr: f64,
    /// `None` when every playout scored the same.
    pub z: Option<f64>,
}

/// `|a - b| / max(|a|, |b|, 1)`
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn oracle(e: OracleError) -> CliError {
    match e {
        OracleError::TooManyPaths(n) => CliError::Invalid(format!(
            "path enumeration exceeded {n} paths; the instance is too large to check (see --path-limit)"
        )),
        other => other.into(),
    }
}

pub fn run(a: &CheckArgs) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let (index, sigma) = parse_strategy(&g, &read_text(&a.strategy)?)?;
    let table = protection_table(&g, &index, &sigma)?;
    let n_slots = index.n_slots();

    let mut max_value_error: f64 = 0.0;
    let mut max_gradient_rel_error: f64 = 0.0;
    let mut violations = Vec::new();
    for (k, &tau) in g.targets().iter().enumerate() {
        for slot in 0..n_slots {
            let want = brute_protection_limited(&g, &index, &sigma, slot, tau, a.path_limit).map_err(oracle)?;
            let got = table.value(slot, k);
            let err = (got - want).abs();
            max_value_error = max_value_error.max(err);
            if err > a.value_tol {
                violations.push(format!(
                    "value of {} at {}: {got} vs enumerated {want}",
                    index.pair_label(&g, index.slot(slot).from) + "->" + &index.pair_label(&g, index.slot(slot).to),
                    g.id(tau)
                ));
            }

            let mut failure = None;
            let fd = fd_gradient(
                |x| match brute_protection_limited(&g, &index, x, slot, tau, a.path_limit) {
                    Ok(v) => v,
                    Err(e) => {
                        failure = Some(e);
                        f64::NAN
                    }
                },
                &sigma,
                a.fd_step,
            );
            if let Some(e) = failure {
                return Err(oracle(e));
            }
            let fd = fd.map_err(oracle)?;
            for (i, &want) in fd.iter().enumerate() {
                let got = table.grad(slot, k).map_or(0.0, |gr| gr.get(i));
                let err = rel_err(got, want);
                max_gradient_rel_error = max_gradient_rel_error.max(err);
                if err > a.grad_tol {
                    violations.push(format!(
                        "gradient of slot {slot} at {} along slot {i}: {got} vs difference quotient {want}",
                        g.id(tau)
                    ));
                }
            }
        }
    }

    let n_entries = n_slots * g.targets().len();
    let mut mc = Vec::with_capacity(a.mc_entries);
    let mut within = 0usize;
    for i in 0..a.mc_entries as u64 {
        let e = (derive_seed(a.seed, 2 * i) % n_entries as u64) as usize;
        let (slot, k) = (e % n_slots, e / n_slots);
        let tau = g.targets()[k];
        let value = table.value(slot, k);
        let (mean, stderr) = mc_protection(
            &g,
            &index,
            &sigma,
            slot,
            tau,
            a.mc_samples,
            derive_seed(a.seed, 2 * i + 1),
        )
        .map_err(oracle)?;
        let diff = (mean - value).abs();
        let z = (stderr > 0.0).then(|| (mean - value) / stderr);
        if z.map_or(diff <= a.value_tol, |z| z.abs() <= 4.0) {
            within += 1;
        }
        mc.push(McEntry {
            edge: edge_ref(&g, &index, slot),
            target: g.id(tau).to_string(),
            value,
            mean,
            stderr,
            z,
        });
    }
    let mc_within_4se = if mc.is_empty() {
        1.0
    } else {
        within as f64 / mc.len() as f64
    };
    if mc_within_4se < MC_PASS_FRACTION {
        violations.push(format!(
            "only {within} of {} playout estimates within four standard errors",
            mc.len()
        ));
    }

    let report = CheckReport {
        entries: n_entries,
        max_value_error,
        max_gradient_rel_error,
        mc,
        mc_within_4se,
        passed: violations.is_empty(),
        violations,
    };
    emit(a.output.as_deref(), &to_json(&report))?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "{} violation(s): {}",
            report.violations.len(),
            report.violations[0]
        )))
    }
}
