//! Exact minmax (L∞) fitting over a subset and the feasibility oracle that
//! turns a dataset into a monotone Boolean function.
//!
//! The minmax problem `min_θ max_{i∈I} |x_i·θ − y_i|` is solved through its
//! linear-programming dual
//!
//! ```text
//! max  Σ_i (λ⁻_i − λ⁺_i) y_i
//! s.t. Σ_i (λ⁺_i − λ⁻_i) x_i = 0,   Σ_i (λ⁺_i + λ⁻_i) = 1,   λ ≥ 0
//! ```
//!
//! which has only `p + 1` rows. A dense revised simplex on it is the classic
//! Chebyshev exchange: pricing a column is checking whether a residual
//! exceeds the current level, and the final basic columns are the basis of
//! the subset (at most `p + 1` points whose own minmax value equals the
//! subset's).

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::boolean::BooleanFunction;
use crate::error::{ensure, Result};
use crate::mask::SubsetMask;
use crate::model::{Dataset, ModelParams, Tolerance};

/// Relative slack added to `ε` before a subset counts as infeasible.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

const REDUCED_COST_TOL: f64 = 1e-12;
const PIVOT_TOL: f64 = 1e-10;

/// Result of a minmax solve on one subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityOutcome {
    /// Optimal minmax objective.
    pub g: f64,
    pub theta: ModelParams,
    /// Sorted point indices of the basis, all inside the queried mask.
    pub basis: Vec<usize>,
    /// Set when the subset was rank deficient or the solver hit its
    /// iteration cap. `g` is still the value at `theta`.
    pub degenerate: bool,
}

/// Largest `g` that still counts as feasible under `tol`.
pub fn feasibility_threshold(tol: Tolerance) -> f64 {
    let eps = tol.epsilon();
    eps + FEASIBILITY_SLACK * eps.max(1.0)
}

/// Exact minimiser of the maximum absolute residual over `mask`.
///
/// Subsets with at most `p` points report `g = 0` (they are feasible by
/// convention) with the basis equal to the subset itself.
pub fn minmax_solve(dataset: &Dataset, mask: &SubsetMask) -> Result<FeasibilityOutcome> {
    ensure!(mask.len() == dataset.n(), "mask length {} does not match dataset size {}", mask.len(), dataset.n());
    ensure!(mask.count() >= 1, "minmax solve needs a non-empty subset");
    Ok(solve_indices(dataset, &mask.indices()))
}

/// `true` when the subset can be fitted within `tol`. The monotone Boolean
/// function value of the subset is the negation of this.
pub fn is_feasible(dataset: &Dataset, mask: &SubsetMask, tol: Tolerance) -> Result<bool> {
    ensure!(mask.len() == dataset.n(), "mask length {} does not match dataset size {}", mask.len(), dataset.n());
    if mask.count() <= dataset.p() {
        return Ok(true);
    }
    Ok(solve_indices(dataset, &mask.indices()).g <= feasibility_threshold(tol))
}

pub(crate) fn solve_indices(dataset: &Dataset, indices: &[usize]) -> FeasibilityOutcome {
    let sol = Chebyshev::new(dataset, indices).solve();
    let mut theta = sol.theta;
    if theta.iter().any(|v| !v.is_finite()) {
        theta.iter_mut().for_each(|v| *v = 0.0);
    }
    let value = indices
        .iter()
        .map(|&i| dataset.signed_residual(i, &theta).abs())
        .fold(0.0, f64::max);
    let mut degenerate = sol.degenerate;
    let (g, basis) = if indices.len() <= dataset.p() {
        if value > 1e-9 * value_scale(dataset, indices) {
            degenerate = true;
        }
        (0.0, indices.to_vec())
    } else {
        (value, sol.basis)
    };
    FeasibilityOutcome {
        g,
        theta: ModelParams { theta },
        basis,
        degenerate,
    }
}

fn value_scale(dataset: &Dataset, indices: &[usize]) -> f64 {
    indices.iter().map(|&i| dataset.target(i).abs()).fold(1.0, f64::max)
}

struct LpSolution {
    theta: Vec<f64>,
    basis: Vec<usize>,
    degenerate: bool,
}

/// Dense revised simplex on the dual of the Chebyshev problem, run on a
/// copy of the subset scaled so that every feature column and the targets
/// have unit max-norm.
struct Chebyshev<'a> {
    indices: &'a [usize],
    p: usize,
    rows: usize,
    /// Scaled features, `k × p` row-major.
    x: Vec<f64>,
    y: Vec<f64>,
    col_scale: Vec<f64>,
    y_scale: f64,
    binv: Vec<f64>,
    basic: Vec<usize>,
    level: Vec<f64>,
    pi: Vec<f64>,
    w: Vec<f64>,
    col: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq)]
enum Phase {
    One,
    Two,
}

#[derive(Clone, Copy, PartialEq)]
enum Step {
    Optimal,
    Pivoted { degenerate: bool },
    Failed,
}

impl<'a> Chebyshev<'a> {
    fn new(dataset: &Dataset, indices: &'a [usize]) -> Self {
        let p = dataset.p();
        let k = indices.len();
        let mut col_scale = vec![0.0f64; p];
        let mut y_scale = 0.0f64;
        for &i in indices {
            for (s, v) in col_scale.iter_mut().zip(dataset.row(i)) {
                *s = s.max(v.abs());
            }
            y_scale = y_scale.max(dataset.target(i).abs());
        }
        col_scale.iter_mut().filter(|s| **s == 0.0).for_each(|s| *s = 1.0);
        if y_scale == 0.0 {
            y_scale = 1.0;
        }
        let mut x = Vec::with_capacity(k * p);
        let mut y = Vec::with_capacity(k);
        for &i in indices {
            x.extend(dataset.row(i).iter().zip(&col_scale).map(|(v, s)| v / s));
            y.push(dataset.target(i) / y_scale);
        }
        let rows = p + 1;
        let mut binv = vec![0.0; rows * rows];
        for r in 0..rows {
            binv[r * rows + r] = 1.0;
        }
        let mut level = vec![0.0; rows];
        level[p] = 1.0;
        Chebyshev {
            indices,
            p,
            rows,
            x,
            y,
            col_scale,
            y_scale,
            binv,
            basic: (0..rows).map(|r| 2 * k + r).collect(),
            level,
            pi: vec![0.0; rows],
            w: vec![0.0; rows],
            col: vec![0.0; rows],
        }
    }

    fn k(&self) -> usize {
        self.indices.len()
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= 2 * self.k()
    }

    fn fill_column(&mut self, j: usize) {
        let p = self.p;
        if self.is_artificial(j) {
            self.col.iter_mut().for_each(|v| *v = 0.0);
            let r = j - 2 * self.k();
            self.col[r] = 1.0;
        } else {
            let pos = j / 2;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            for c in 0..p {
                self.col[c] = sign * self.x[pos * p + c];
            }
            self.col[p] = 1.0;
        }
    }

    fn cost(&self, j: usize, phase: Phase) -> f64 {
        match (phase, self.is_artificial(j)) {
            (Phase::One, true) => -1.0,
            (Phase::One, false) | (Phase::Two, true) => 0.0,
            (Phase::Two, false) => {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                -sign * self.y[j / 2]
            }
        }
    }

    fn update_prices(&mut self, phase: Phase) {
        let rows = self.rows;
        self.pi.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..rows {
            let c = self.cost(self.basic[r], phase);
            if c != 0.0 {
                for (pi, b) in self.pi.iter_mut().zip(&self.binv[r * rows..(r + 1) * rows]) {
                    *pi += c * b;
                }
            }
        }
    }

    /// Reduced cost of the better sign column of point `pos`:
    /// `|w·y_i + π_θ·x_i| − π_t`, together with that column's id.
    fn best_column_of(&self, pos: usize, phase: Phase) -> (f64, usize) {
        let p = self.p;
        let mut u = if phase == Phase::Two { self.y[pos] } else { 0.0 };
        for c in 0..p {
            u += self.pi[c] * self.x[pos * p + c];
        }
        let j = if u > 0.0 { 2 * pos + 1 } else { 2 * pos };
        (u.abs() - self.pi[p], j)
    }

    fn step(&mut self, phase: Phase, bland: bool) -> Step {
        self.update_prices(phase);
        let mut entering = None;
        let mut best = REDUCED_COST_TOL;
        for pos in 0..self.k() {
            let (d, j) = self.best_column_of(pos, phase);
            if d > best && !self.basic.contains(&j) {
                entering = Some(j);
                best = d;
                if bland {
                    break;
                }
            }
        }
        let Some(j) = entering else {
            return Step::Optimal;
        };
        self.fill_column(j);
        let rows = self.rows;
        for r in 0..rows {
            self.w[r] = self.binv[r * rows..(r + 1) * rows].iter().zip(&self.col).map(|(a, b)| a * b).sum();
        }
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for r in 0..rows {
            if self.w[r] <= PIVOT_TOL {
                continue;
            }
            let ratio = self.level[r].max(0.0) / self.w[r];
            let better = match leave {
                None => true,
                Some(l) => {
                    if ratio < best_ratio - 1e-14 {
                        true
                    } else if ratio <= best_ratio + 1e-14 {
                        if bland {
                            self.basic[r] < self.basic[l]
                        } else {
                            self.w[r] > self.w[l]
                        }
                    } else {
                        false
                    }
                }
            };
            if better {
                leave = Some(r);
                best_ratio = best_ratio.min(ratio);
            }
        }
        let Some(r) = leave else {
            return Step::Failed;
        };
        self.pivot(r, j);
        Step::Pivoted {
            degenerate: best_ratio <= 1e-14,
        }
    }

    /// Replaces the basic variable of row `r` by column `j`; `self.w` must
    /// hold `B⁻¹ a_j`.
    fn pivot(&mut self, r: usize, j: usize) {
        let rows = self.rows;
        let inv = 1.0 / self.w[r];
        for v in &mut self.binv[r * rows..(r + 1) * rows] {
            *v *= inv;
        }
        self.level[r] *= inv;
        for q in 0..rows {
            if q == r || self.w[q] == 0.0 {
                continue;
            }
            let f = self.w[q];
            for c in 0..rows {
                self.binv[q * rows + c] -= f * self.binv[r * rows + c];
            }
            self.level[q] -= f * self.level[r];
        }
        self.basic[r] = j;
    }

    fn run_phase(&mut self, phase: Phase) -> bool {
        let cap = 50 * (self.rows + self.k()) + 100;
        let mut degenerate_run = 0;
        for _ in 0..cap {
            let bland = degenerate_run > 2 * self.rows;
            match self.step(phase, bland) {
                Step::Optimal => return true,
                Step::Failed => return false,
                Step::Pivoted { degenerate } => {
                    degenerate_run = if degenerate { degenerate_run + 1 } else { 0 };
                }
            }
        }
        false
    }

    /// Pivots zero-level artificial variables out of the basis. Returns
    /// `false` if some row is redundant (rank deficient subset).
    fn drive_out_artificials(&mut self) -> bool {
        let rows = self.rows;
        let mut full_rank = true;
        for r in 0..rows {
            if !self.is_artificial(self.basic[r]) {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..2 * self.k() {
                if self.basic.contains(&j) {
                    continue;
                }
                self.fill_column(j);
                let v: f64 = self.binv[r * rows..(r + 1) * rows].iter().zip(&self.col).map(|(a, b)| a * b).sum();
                if v.abs() > 1e-9 && best.is_none_or(|(_, b)| v.abs() > b) {
                    best = Some((j, v.abs()));
                }
            }
            match best {
                Some((j, _)) => {
                    self.fill_column(j);
                    for q in 0..rows {
                        self.w[q] = self.binv[q * rows..(q + 1) * rows].iter().zip(&self.col).map(|(a, b)| a * b).sum();
                    }
                    self.pivot(r, j);
                }
                None => full_rank = false,
            }
        }
        full_rank
    }

    fn solve(mut self) -> LpSolution {
        let mut degenerate = !self.run_phase(Phase::One);
        let infeasibility: f64 = (0..self.rows)
            .filter(|&r| self.is_artificial(self.basic[r]))
            .map(|r| self.level[r].abs())
            .sum();
        if infeasibility > 1e-9 {
            degenerate = true;
        }
        if !self.drive_out_artificials() {
            degenerate = true;
        }
        if !self.run_phase(Phase::Two) {
            degenerate = true;
        }
        self.update_prices(Phase::Two);
        let theta = (0..self.p)
            .map(|c| -self.pi[c] * self.y_scale / self.col_scale[c])
            .collect();
        let mut basis: Vec<usize> = self
            .basic
            .iter()
            .filter(|&&j| !self.is_artificial(j))
            .map(|&j| self.indices[j / 2])
            .collect();
        basis.sort_unstable();
        basis.dedup();
        LpSolution {
            theta,
            basis,
            degenerate,
        }
    }
}

/// The monotone Boolean function of a dataset: `true` (1) for subsets that
/// cannot be fitted within `ε`, `false` (0) otherwise.
///
/// Counts every evaluation and every LP actually solved; both counters are
/// safe to bump from concurrent workers.
#[derive(Debug)]
pub struct FeasibilityOracle<'a> {
    dataset: &'a Dataset,
    tol: Tolerance,
    threshold: f64,
    calls: AtomicU64,
    lp_solves: AtomicU64,
}

impl<'a> FeasibilityOracle<'a> {
    pub fn new(dataset: &'a Dataset, tol: Tolerance) -> Self {
        FeasibilityOracle {
            dataset,
            tol,
            threshold: feasibility_threshold(tol),
            calls: AtomicU64::new(0),
            lp_solves: AtomicU64::new(0),
        }
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tol
    }

    /// Number of function evaluations so far.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    /// Number of evaluations that needed a linear program.
    pub fn lp_solves(&self) -> u64 {
        self.lp_solves.load(Ordering::Relaxed)
    }

    pub fn is_feasible_value(&self, g: f64) -> bool {
        g <= self.threshold
    }

    /// Counted minmax solve (one evaluation of the function).
    pub fn solve(&self, mask: &SubsetMask) -> Result<FeasibilityOutcome> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let outcome = minmax_solve(self.dataset, mask)?;
        if mask.count() > self.dataset.p() {
            self.lp_solves.fetch_add(1, Ordering::Relaxed);
        }
        Ok(outcome)
    }

    /// Counted feasibility test.
    pub fn is_feasible(&self, mask: &SubsetMask) -> bool {
        assert_eq!(mask.len(), self.dataset.n(), "mask length does not match dataset");
        self.calls.fetch_add(1, Ordering::Relaxed);
        if mask.count() <= self.dataset.p() {
            return true;
        }
        self.lp_solves.fetch_add(1, Ordering::Relaxed);
        self.is_feasible_value(solve_indices(self.dataset, &mask.indices()).g)
    }
}

impl BooleanFunction for FeasibilityOracle<'_> {
    fn arity(&self) -> usize {
        self.dataset.n()
    }

    fn eval(&self, x: &SubsetMask) -> bool {
        !self.is_feasible(x)
    }

    /// Returns the basis of an infeasible subset as witness, provided the
    /// basis alone is infeasible too.
    fn eval_with_witness(&self, x: &SubsetMask) -> (bool, Option<SubsetMask>) {
        if x.count() <= self.dataset.p() {
            return (self.eval(x), None);
        }
        let outcome = self.solve(x).expect("mask length checked by caller");
        if self.is_feasible_value(outcome.g) {
            return (false, None);
        }
        let basis = SubsetMask::from_indices(x.len(), outcome.basis).ok();
        let witness = basis.filter(|b| {
            b.count() > self.dataset.p() && !self.is_feasible_value(solve_indices(self.dataset, &b.indices()).g)
        });
        (true, witness)
    }
}
