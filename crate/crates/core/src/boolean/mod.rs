//! Boolean functions on the cube `{0,1}^n`: influences, ideal structures and
//! upper-zero search.
//!
//! Value convention throughout: `true` is 1 (infeasible), `false` is 0
//! (feasible).

mod ideal;
mod influence;
mod search;

pub use ideal::{
    binomial, corollary1_gap, ideal_mbf, theorem1_boundary_count, theorem1_influence, theorem2_boundary_count,
    theorem2_influence, IdealMbf, IdealSpec,
};
pub use influence::{
    influence_exact, influence_exact_counts, influence_exact_rational, influence_mse, influence_sampled, separation,
    InfluenceVector, SamplingOptions,
};
pub use search::{is_upper_zero, max_upper_zero_exhaustive, Combinations, EXHAUSTIVE_MAX_N};

use crate::error::{ensure, Result};
use crate::mask::SubsetMask;

/// Largest cube a [`TruthTable`] may tabulate.
pub const TABLE_MAX_N: usize = 24;

pub trait BooleanFunction: Sync {
    /// Dimension `n` of the cube.
    fn arity(&self) -> usize;

    fn eval(&self, x: &SubsetMask) -> bool;

    /// `f(x)` and, when it is 1, optionally a subset `w ≼ x` with
    /// `f(w) = 1`. A monotone function is then 1 on every superset of `w`,
    /// which search routines use to skip evaluations.
    fn eval_with_witness(&self, x: &SubsetMask) -> (bool, Option<SubsetMask>) {
        (self.eval(x), None)
    }
}

impl<T: BooleanFunction + ?Sized> BooleanFunction for &T {
    fn arity(&self) -> usize {
        (**self).arity()
    }

    fn eval(&self, x: &SubsetMask) -> bool {
        (**self).eval(x)
    }

    fn eval_with_witness(&self, x: &SubsetMask) -> (bool, Option<SubsetMask>) {
        (**self).eval_with_witness(x)
    }
}

/// Adapts a closure into a [`BooleanFunction`].
pub struct FnFunction<F> {
    n: usize,
    f: F,
}

pub fn from_fn<F: Fn(&SubsetMask) -> bool + Sync>(n: usize, f: F) -> FnFunction<F> {
    FnFunction { n, f }
}

impl<F: Fn(&SubsetMask) -> bool + Sync> BooleanFunction for FnFunction<F> {
    fn arity(&self) -> usize {
        self.n
    }

    fn eval(&self, x: &SubsetMask) -> bool {
        (self.f)(x)
    }
}

/// All `2^n` values of a function, indexed by the mask's integer form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruthTable {
    n: usize,
    words: Vec<u64>,
}

impl TruthTable {
    fn blank(n: usize) -> Result<Self> {
        ensure!(n <= TABLE_MAX_N, "cannot tabulate a function of {n} variables (limit {TABLE_MAX_N})");
        Ok(TruthTable {
            n,
            words: vec![0; (1usize << n).div_ceil(64)],
        })
    }

    /// Evaluates `f` at every vertex.
    pub fn tabulate<F: BooleanFunction + ?Sized>(f: &F) -> Result<Self> {
        let mut table = Self::blank(f.arity())?;
        for x in 0..1u64 << table.n {
            if f.eval(&SubsetMask::from_bits(table.n, x)) {
                table.set(x);
            }
        }
        Ok(table)
    }

    /// Tabulates a function known to be monotone, evaluating `f` only at
    /// vertices whose lower neighbours are all 0.
    pub fn tabulate_monotone<F: BooleanFunction + ?Sized>(f: &F) -> Result<Self> {
        let mut table = Self::blank(f.arity())?;
        for x in 0..1u64 << table.n {
            let mut rest = x;
            let mut forced = false;
            while rest != 0 {
                let bit = rest & rest.wrapping_neg();
                if table.get(x ^ bit) {
                    forced = true;
                    break;
                }
                rest ^= bit;
            }
            if forced || f.eval(&SubsetMask::from_bits(table.n, x)) {
                table.set(x);
            }
        }
        Ok(table)
    }

    pub fn get(&self, x: u64) -> bool {
        self.words[(x / 64) as usize] >> (x % 64) & 1 == 1
    }

    fn set(&mut self, x: u64) {
        self.words[(x / 64) as usize] |= 1 << (x % 64);
    }

    /// Number of vertices with value 1.
    pub fn weight(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// `true` when `α ≼ β ⇒ f(α) ≤ f(β)`, checked on all covering pairs.
    pub fn is_monotone(&self) -> bool {
        (0..1u64 << self.n).all(|x| {
            !self.get(x) || (0..self.n).all(|i| x >> i & 1 == 1 || self.get(x | 1 << i))
        })
    }

    /// `#{x : f(x) ≠ f(x^{⊕i})}` for every coordinate.
    pub fn flip_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.n];
        for x in 0..1u64 << self.n {
            let fx = self.get(x);
            for (i, c) in counts.iter_mut().enumerate() {
                if fx != self.get(x ^ (1 << i)) {
                    *c += 1;
                }
            }
        }
        counts
    }
}

impl BooleanFunction for TruthTable {
    fn arity(&self) -> usize {
        self.n
    }

    fn eval(&self, x: &SubsetMask) -> bool {
        self.get(x.to_bits())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulation_modes_agree_on_monotone_functions() {
        let f = from_fn(6, |x: &SubsetMask| x.count() >= 3 || (x.get(0) && x.get(5)));
        let direct = TruthTable::tabulate(&f).unwrap();
        let lazy = TruthTable::tabulate_monotone(&f).unwrap();
        assert_eq!(direct, lazy);
        assert!(direct.is_monotone());
    }

    #[test]
    fn non_monotone_is_detected() {
        let parity = from_fn(3, |x: &SubsetMask| x.count() % 2 == 1);
        let table = TruthTable::tabulate(&parity).unwrap();
        assert!(!table.is_monotone());
        assert_eq!(table.weight(), 4);
        assert_eq!(table.flip_counts(), vec![8, 8, 8]);
    }

    #[test]
    fn table_size_guard() {
        let f = from_fn(25, |_: &SubsetMask| false);
        assert!(TruthTable::tabulate(&f).is_err());
    }
}
