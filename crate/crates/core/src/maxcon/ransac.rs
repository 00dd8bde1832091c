use std::time::Instant;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{fit, is_single_step_maximal, MaxConResult};
use crate::error::{ensure, Result};
use crate::feasibility::FeasibilityOracle;
use crate::linalg::solve_square;
use crate::mask::SubsetMask;
use crate::model::{Dataset, ModelParams, Tolerance};
use crate::seed;

/// How long a RANSAC run may keep drawing hypotheses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Iterations(u64),
    /// Stop after `secs` of wall time or `max_iterations`, whichever is first.
    WallTime { secs: f64, max_iterations: u64 },
}

impl Budget {
    fn max_iterations(self) -> u64 {
        match self {
            Budget::Iterations(n) => n,
            Budget::WallTime { max_iterations, .. } => max_iterations,
        }
    }
}

pub fn ransac(dataset: &Dataset, tol: Tolerance, iterations: u64, seed: u64) -> Result<MaxConResult> {
    ransac_with_budget(dataset, tol, Budget::Iterations(iterations), seed)
}

pub fn lo_ransac(dataset: &Dataset, tol: Tolerance, iterations: u64, seed: u64) -> Result<MaxConResult> {
    lo_ransac_with_budget(dataset, tol, Budget::Iterations(iterations), seed)
}

pub fn ransac_with_budget(dataset: &Dataset, tol: Tolerance, budget: Budget, seed: u64) -> Result<MaxConResult> {
    hypothesise_and_test(dataset, tol, budget, seed, false)
}

/// RANSAC where every new best hypothesis is refined: refit by minmax over
/// its consensus set and recount, for as long as the consensus grows.
pub fn lo_ransac_with_budget(dataset: &Dataset, tol: Tolerance, budget: Budget, seed: u64) -> Result<MaxConResult> {
    hypothesise_and_test(dataset, tol, budget, seed, true)
}

fn hypothesise_and_test(dataset: &Dataset, tol: Tolerance, budget: Budget, seed: u64, local: bool) -> Result<MaxConResult> {
    ensure!(budget.max_iterations() >= 1, "RANSAC needs at least one iteration");
    if let Budget::WallTime { secs, .. } = budget {
        ensure!(secs.is_finite() && secs >= 0.0, "wall-time budget must be finite and nonnegative");
    }
    let start = Instant::now();
    let (n, p) = (dataset.n(), dataset.p());
    let oracle = FeasibilityOracle::new(dataset, tol);
    let mut rng = seed::rng(seed);
    let mut best: Option<(Vec<f64>, Vec<usize>)> = None;
    let mut hypotheses = 0u64;

    if n <= p {
        let (theta, _) = fit(dataset, &SubsetMask::full(n))?;
        best = Some((theta.theta, (0..n).collect()));
    } else {
        let mut a = vec![0.0; p * p];
        let mut b = vec![0.0; p];
        while hypotheses < budget.max_iterations() {
            if let Budget::WallTime { secs, .. } = budget {
                if hypotheses > 0 && start.elapsed().as_secs_f64() >= secs {
                    break;
                }
            }
            hypotheses += 1;
            for (r, i) in sample(&mut rng, n, p).into_iter().enumerate() {
                a[r * p..(r + 1) * p].copy_from_slice(dataset.row(i));
                b[r] = dataset.target(i);
            }
            let Some(theta) = solve_square(&a, &b, p) else { continue };
            let inliers = dataset.consensus(&theta, tol);
            if best.as_ref().is_some_and(|(_, cur)| inliers.len() <= cur.len()) {
                continue;
            }
            best = Some(if local { refine(&oracle, tol, theta, inliers)? } else { (theta, inliers) });
        }
    }

    let (theta, inliers) = match best {
        Some(found) => found,
        // Every sample was degenerate: fall back to the empty consensus.
        None => (vec![0.0; p], Vec::new()),
    };
    let mask = SubsetMask::from_indices(n, inliers)?;
    let (_, g) = fit(dataset, &mask)?;
    Ok(MaxConResult {
        method: if local { "lo-ransac" } else { "ransac" }.to_string(),
        certified_upper_zero: is_single_step_maximal(dataset, tol, &mask),
        mask,
        theta: ModelParams::new(theta)?,
        g,
        trace: Vec::new(),
        expanded: Vec::new(),
        termination_calls: 0,
        expansion_calls: 0,
        oracle_calls: oracle.calls(),
        lp_solves: oracle.lp_solves(),
        hypotheses,
        wall_secs: start.elapsed().as_secs_f64(),
    })
}

fn refine(
    oracle: &FeasibilityOracle<'_>,
    tol: Tolerance,
    mut theta: Vec<f64>,
    mut inliers: Vec<usize>,
) -> Result<(Vec<f64>, Vec<usize>)> {
    let dataset = oracle.dataset();
    loop {
        let mask = SubsetMask::from_indices(dataset.n(), inliers.iter().copied())?;
        let refit = oracle.solve(&mask)?.theta.theta;
        let grown = dataset.consensus(&refit, tol);
        if grown.len() <= inliers.len() {
            return Ok((theta, inliers));
        }
        theta = refit;
        inliers = grown;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_line2d, Corruption};

    fn tol(e: f64) -> Tolerance {
        Tolerance::new(e).unwrap()
    }

    #[test]
    fn clean_data_is_fully_explained() {
        let clean = Corruption {
            inlier_noise: 0.0,
            ..Corruption::default()
        };
        let exact = generate_line2d(20, 0.0, clean, 3).unwrap().dataset;
        assert_eq!(ransac(&exact, tol(0.1), 1, 0).unwrap().consensus_size(), 20);
        assert_eq!(lo_ransac(&exact, tol(0.1), 1, 0).unwrap().consensus_size(), 20);
    }

    #[test]
    fn local_optimisation_never_loses() {
        for s in 0..20 {
            let data = generate_line2d(15, 0.25, Corruption::default(), s).unwrap().dataset;
            for iters in [1, 5, 50] {
                let plain = ransac(&data, tol(0.1), iters, s).unwrap();
                let lo = lo_ransac(&data, tol(0.1), iters, s).unwrap();
                assert!(lo.consensus_size() >= plain.consensus_size());
                assert_eq!(plain.hypotheses, iters);
            }
        }
    }

    #[test]
    fn single_hypothesis_consensus() {
        let data = generate_line2d(15, 0.25, Corruption::default(), 9).unwrap().dataset;
        let res = ransac(&data, tol(0.1), 1, 42).unwrap();
        let n_in = data.consensus(&res.theta.theta, tol(0.1)).len();
        assert_eq!(res.consensus_size(), n_in);
    }

    #[test]
    fn zero_iterations_rejected() {
        let data = generate_line2d(5, 0.0, Corruption::default(), 0).unwrap().dataset;
        assert!(ransac(&data, tol(0.1), 0, 0).is_err());
    }
}
