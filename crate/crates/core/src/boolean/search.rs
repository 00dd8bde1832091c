use super::BooleanFunction;
use crate::error::{ensure, Result};
use crate::mask::SubsetMask;

/// Largest cube searched by [`max_upper_zero_exhaustive`].
pub const EXHAUSTIVE_MAX_N: usize = 20;

/// `k`-subsets of `0..n` in lexicographic order of their sorted index lists.
pub struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            current: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let c = self.current.as_mut().unwrap();
        let k = c.len();
        match (0..k).rev().find(|&j| c[j] < self.n - k + j) {
            Some(j) => {
                c[j] += 1;
                for t in j + 1..k {
                    c[t] = c[t - 1] + 1;
                }
            }
            None => self.current = None,
        }
        Some(out)
    }
}

/// `true` iff `f(mask) = 0` and every single-bit addition gives 1.
///
/// For a monotone `f` this is exactly the upper-zero property.
pub fn is_upper_zero<F: BooleanFunction + ?Sized>(f: &F, mask: &SubsetMask) -> bool {
    !f.eval(mask) && mask.zeros().all(|i| f.eval(&mask.with(i)))
}

/// A feasible vertex of maximum weight of a monotone `f`, ties broken towards
/// the lexicographically smallest index list.
///
/// Levels are scanned from the top. Witnesses returned by `f` prune every
/// candidate that contains one.
pub fn max_upper_zero_exhaustive<F: BooleanFunction + ?Sized>(f: &F) -> Result<SubsetMask> {
    let n = f.arity();
    ensure!(n <= EXHAUSTIVE_MAX_N, "exhaustive search needs n ≤ {EXHAUSTIVE_MAX_N}, got {n}");
    let mut witnesses: Vec<u64> = Vec::new();
    for k in (0..=n).rev() {
        for combo in Combinations::new(n, k) {
            let bits = combo.iter().fold(0u64, |acc, &i| acc | 1 << i);
            if witnesses.iter().any(|&w| w & !bits == 0) {
                continue;
            }
            let x = SubsetMask::from_bits(n, bits);
            let (value, witness) = f.eval_with_witness(&x);
            if !value {
                return Ok(x);
            }
            if let Some(w) = witness {
                debug_assert!(w.is_subset_of(&x));
                witnesses.push(w.to_bits());
            }
        }
    }
    // Only reachable when f(0) = 1, in which case no vertex is feasible.
    Err(crate::Error::invalid("function has no zero: f(0…0) = 1"))
}
