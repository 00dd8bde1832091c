//! The greedy influence-based solver, its ablation variants, and RANSAC
//! baselines.

mod config;
mod ransac;

pub use config::{default_q, MaxConConfig, Variant, DEFAULT_M};
pub use ransac::{lo_ransac, lo_ransac_with_budget, ransac, ransac_with_budget, Budget};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::boolean::{influence_sampled, SamplingOptions};
use crate::error::{ensure, Result};
use crate::feasibility::{is_feasible, minmax_solve, FeasibilityOracle};
use crate::mask::SubsetMask;
use crate::model::{Dataset, ModelParams, Tolerance};
use crate::seed;

/// Seed domain for per-iteration influence streams.
const ITERATION_DOMAIN: u64 = 0x4954_4552;

/// One removal step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub removed: usize,
    /// Basis of the subset the point was removed from.
    pub basis: Vec<usize>,
    /// Minmax value of that subset.
    pub g: f64,
    /// Points whose influence was estimated this iteration.
    pub targets: Vec<usize>,
    /// Estimated influences, aligned with `targets`.
    pub influences: Vec<f64>,
    /// Feasibility evaluations spent in this iteration.
    pub oracle_calls: u64,
    pub wall_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxConResult {
    pub method: String,
    /// Final consensus set.
    pub mask: SubsetMask,
    pub theta: ModelParams,
    /// Minmax value of the final consensus set.
    pub g: f64,
    pub trace: Vec<IterationRecord>,
    /// Points added back by local expansion, in order.
    pub expanded: Vec<usize>,
    /// Evaluations spent checking termination after the last removal.
    pub termination_calls: u64,
    pub expansion_calls: u64,
    /// All feasibility evaluations, including those inside sampling.
    pub oracle_calls: u64,
    pub lp_solves: u64,
    /// Hypotheses drawn (RANSAC family only).
    pub hypotheses: u64,
    /// No single-point addition to `mask` stays feasible.
    pub certified_upper_zero: bool,
    pub wall_secs: f64,
}

impl MaxConResult {
    pub fn consensus_size(&self) -> usize {
        self.mask.count()
    }

    /// Mask before local expansion.
    pub fn pre_expansion_mask(&self) -> SubsetMask {
        let mut mask = self.mask.clone();
        for &i in &self.expanded {
            mask.clear(i);
        }
        mask
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// The greedy solver with basis-restricted re-estimation. Local expansion
/// runs when `config.local_expansion` is set; `config.variant` is ignored.
pub fn mbf_maxcon(dataset: &Dataset, config: &MaxConConfig) -> Result<MaxConResult> {
    run(dataset, config, Variant::Full, config.local_expansion)
}

/// Runs the variant selected by `config.variant`.
pub fn mbf_maxcon_variant(dataset: &Dataset, config: &MaxConConfig) -> Result<MaxConResult> {
    let expand = config.local_expansion && config.variant != Variant::NoLocalExpansion;
    run(dataset, config, config.variant, expand)
}

fn run(dataset: &Dataset, config: &MaxConConfig, variant: Variant, expand: bool) -> Result<MaxConResult> {
    config.validate(dataset)?;
    let start = Instant::now();
    let n = dataset.n();
    let q = config.resolved_q(dataset);
    let oracle = FeasibilityOracle::new(dataset, config.epsilon);
    let mut mask = SubsetMask::full(n);
    let mut trace = Vec::new();

    // nR estimates once over the full cube and fixes the removal order.
    let mut fixed_order: Option<Vec<(usize, f64)>> = None;
    if variant == Variant::NoReestimation {
        let all: Vec<usize> = (0..n).collect();
        let inf = influence_sampled(&oracle, &mask, &all, sampling(config, q, 0))?;
        let mut order: Vec<(usize, f64)> = inf.defined().collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        fixed_order = Some(order);
    }
    let mut order_pos = 0;
    let mut pending_calls = oracle.calls();

    let termination_calls = loop {
        let iter_start = Instant::now();
        let before = oracle.calls();
        let outcome = oracle.solve(&mask)?;
        if oracle.is_feasible_value(outcome.g) {
            break oracle.calls() - before;
        }
        let t = trace.len() as u64;
        let (targets, influences, removed) = match &fixed_order {
            Some(order) => {
                // Skip entries already gone; every remaining point is still queued.
                while !mask.get(order[order_pos].0) {
                    order_pos += 1;
                }
                let (i, v) = order[order_pos];
                order_pos += 1;
                (vec![i], vec![v], i)
            }
            None => {
                let targets = match variant {
                    Variant::NoBasis => mask.indices(),
                    _ if outcome.basis.is_empty() => mask.indices(),
                    _ => outcome.basis.clone(),
                };
                let inf = influence_sampled(&oracle, &mask, &targets, sampling(config, q, t + 1))?;
                let values: Vec<f64> = targets.iter().map(|&i| inf.get(i).unwrap_or(0.0)).collect();
                let removed = argmax_lowest(&targets, &values);
                (targets, values, removed)
            }
        };
        mask.clear(removed);
        trace.push(IterationRecord {
            removed,
            basis: outcome.basis,
            g: outcome.g,
            targets,
            influences,
            oracle_calls: oracle.calls() - before + pending_calls,
            wall_secs: iter_start.elapsed().as_secs_f64(),
        });
        pending_calls = 0;
    };
    // The nR up-front estimate is charged to the first iteration, or to the
    // termination check when nothing was removed.
    let termination_calls = termination_calls + pending_calls;

    let before = oracle.calls();
    let expanded = if expand { expand_with(&oracle, &mut mask) } else { Vec::new() };
    let expansion_calls = oracle.calls() - before;
    let certified_upper_zero = if expand { true } else { is_single_step_maximal(dataset, config.epsilon, &mask) };
    let (theta, g) = fit(dataset, &mask)?;
    Ok(MaxConResult {
        method: format!("mbf-maxcon/{}", variant.name()),
        mask,
        theta,
        g,
        trace,
        expanded,
        termination_calls,
        expansion_calls,
        oracle_calls: oracle.calls(),
        lp_solves: oracle.lp_solves(),
        hypotheses: 0,
        certified_upper_zero,
        wall_secs: start.elapsed().as_secs_f64(),
    })
}

fn sampling(config: &MaxConConfig, q: f64, iteration: u64) -> SamplingOptions {
    SamplingOptions::new(config.m, q, seed::derive(config.seed, ITERATION_DOMAIN, iteration))
}

/// Target with the largest value, the lowest index among ties.
fn argmax_lowest(targets: &[usize], values: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..targets.len() {
        if values[k] > values[best] || (values[k] == values[best] && targets[k] < targets[best]) {
            best = k;
        }
    }
    targets[best]
}

/// Minmax fit of the final mask; an empty mask gets the zero model.
pub(crate) fn fit(dataset: &Dataset, mask: &SubsetMask) -> Result<(ModelParams, f64)> {
    if mask.count() == 0 {
        return Ok((ModelParams::new(vec![0.0; dataset.p()])?, 0.0));
    }
    let outcome = minmax_solve(dataset, mask)?;
    Ok((outcome.theta, outcome.g))
}

/// Adds points in ascending index order whenever the addition stays feasible.
///
/// A point rejected earlier in the scan stays rejected after later additions
/// (supersets of an infeasible set are infeasible), so one pass reaches the
/// same fixed point as rescanning from the start after each acceptance.
fn expand_with(oracle: &FeasibilityOracle<'_>, mask: &mut SubsetMask) -> Vec<usize> {
    let mut added = Vec::new();
    for i in 0..mask.len() {
        if !mask.get(i) && oracle.is_feasible(&mask.with(i)) {
            mask.set(i);
            added.push(i);
        }
    }
    added
}

/// Local expansion: grows a feasible `mask` to an upper zero.
pub fn local_expansion(dataset: &Dataset, tol: Tolerance, mask: &SubsetMask) -> Result<SubsetMask> {
    ensure!(mask.len() == dataset.n(), "mask length {} does not match dataset size {}", mask.len(), dataset.n());
    ensure!(is_feasible(dataset, mask, tol)?, "local expansion needs a feasible starting subset");
    let oracle = FeasibilityOracle::new(dataset, tol);
    let mut out = mask.clone();
    expand_with(&oracle, &mut out);
    Ok(out)
}

/// `true` when no unset point can be added while staying feasible.
pub(crate) fn is_single_step_maximal(dataset: &Dataset, tol: Tolerance, mask: &SubsetMask) -> bool {
    let oracle = FeasibilityOracle::new(dataset, tol);
    mask.zeros().all(|i| !oracle.is_feasible(&mask.with(i)))
}
