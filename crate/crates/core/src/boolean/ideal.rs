use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::BooleanFunction;
use crate::error::{ensure, Result};
use crate::mask::SubsetMask;

/// An ideal (K-)structure: `f(x) = 0` iff `‖x‖₁ ≤ p` or `x` lies inside one
/// of the member sets.
///
/// Member sets may share at most `p` points, so the sub-cubes they span are
/// disjoint above level `p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdealSpec {
    n: usize,
    p: usize,
    structures: Vec<SubsetMask>,
}

impl IdealSpec {
    pub fn new(n: usize, p: usize, structures: Vec<Vec<usize>>) -> Result<Self> {
        ensure!(n <= 64, "ideal functions are limited to n ≤ 64, got {n}");
        ensure!(!structures.is_empty(), "an ideal function needs at least one structure");
        let masks = structures
            .into_iter()
            .map(|s| SubsetMask::from_indices(n, s))
            .collect::<Result<Vec<_>>>()?;
        for (r, s) in masks.iter().enumerate() {
            ensure!(p < s.count(), "structure {r} has {} points, need more than p = {p}", s.count());
            for (t, other) in masks.iter().enumerate().skip(r + 1) {
                let shared = s.intersection_count(other);
                ensure!(shared <= p, "structures {r} and {t} share {shared} points, more than p = {p}");
            }
        }
        Ok(IdealSpec { n, p, structures: masks })
    }

    /// One structure on the points `0..k`.
    pub fn single(n: usize, p: usize, k: usize) -> Result<Self> {
        ensure!(k <= n, "structure size {k} exceeds n = {n}");
        Self::new(n, p, vec![(0..k).collect()])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn structures(&self) -> &[SubsetMask] {
        &self.structures
    }

    /// Structure sizes `k_r`.
    pub fn levels(&self) -> Vec<usize> {
        self.structures.iter().map(SubsetMask::count).collect()
    }

    pub fn is_disjoint(&self) -> bool {
        self.structures
            .iter()
            .enumerate()
            .all(|(r, s)| self.structures[r + 1..].iter().all(|t| s.intersection_count(t) == 0))
    }

    /// Membership string `c_1…c_K` of point `i`.
    pub fn membership(&self, i: usize) -> Vec<bool> {
        self.structures.iter().map(|s| s.get(i)).collect()
    }

    /// Points whose membership string equals `class`.
    pub fn class_members(&self, class: &[bool]) -> Vec<usize> {
        (0..self.n).filter(|&i| self.membership(i) == class).collect()
    }

    /// Membership strings with at least one point, in order of first point.
    pub fn classes(&self) -> Vec<Vec<bool>> {
        let mut out: Vec<Vec<bool>> = Vec::new();
        for i in 0..self.n {
            let c = self.membership(i);
            if !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }

    /// Points outside every structure.
    pub fn outliers(&self) -> Vec<usize> {
        self.class_members(&vec![false; self.structures.len()])
    }
}

#[derive(Clone, Debug)]
pub struct IdealMbf {
    spec: IdealSpec,
}

impl IdealMbf {
    pub fn spec(&self) -> &IdealSpec {
        &self.spec
    }
}

pub fn ideal_mbf(spec: &IdealSpec) -> IdealMbf {
    IdealMbf { spec: spec.clone() }
}

impl BooleanFunction for IdealMbf {
    fn arity(&self) -> usize {
        self.spec.n
    }

    fn eval(&self, x: &SubsetMask) -> bool {
        x.count() > self.spec.p && !self.spec.structures.iter().any(|s| x.is_subset_of(s))
    }
}

/// `C(n, k)` exactly; zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for j in 0..k {
        acc = acc * BigInt::from(n - j) / BigInt::from(j + 1);
    }
    acc
}

/// `Σ_{l=p+1}^{k} C(k, l)`: vertices of a structure's sub-cube above level `p`.
fn upper_levels(k: usize, p: usize) -> BigInt {
    (p + 1..=k).map(|l| binomial(k, l)).sum()
}

/// Converts a boundary count into the flip probability over `2^n` vertices.
/// Each boundary pair `{x, x^{⊕i}}` contributes both of its endpoints.
fn count_to_influence(count: BigInt, n: usize) -> BigRational {
    BigRational::new(count * 2, BigInt::one() << n)
}

/// Number of pairs `{x, x^{⊕i}}` on which an ideal single structure of size
/// `k` changes value, for an inlier or an outlier coordinate `i`.
pub fn theorem1_boundary_count(n: usize, p: usize, k: usize, is_inlier: bool) -> Result<BigInt> {
    ensure!(p < k && k <= n, "need p < k ≤ n, got n = {n}, p = {p}, k = {k}");
    ensure!(is_inlier || k < n, "a structure with k = n has no outliers");
    let base = binomial(n - 1, p);
    Ok(if is_inlier {
        base - binomial(k - 1, p)
    } else {
        base + upper_levels(k, p)
    })
}

/// `Pr_x[f(x) ≠ f(x^{⊕i})]` for an ideal single structure.
pub fn theorem1_influence(n: usize, p: usize, k: usize, is_inlier: bool) -> Result<BigRational> {
    Ok(count_to_influence(theorem1_boundary_count(n, p, k, is_inlier)?, n))
}

/// Boundary count for a coordinate of membership class `class` in an ideal
/// K-structure with pairwise-disjoint member sets.
pub fn theorem2_boundary_count(spec: &IdealSpec, class: &[bool]) -> Result<BigInt> {
    ensure!(
        class.len() == spec.structures.len(),
        "membership string has {} entries for {} structures",
        class.len(),
        spec.structures.len()
    );
    ensure!(spec.is_disjoint(), "the closed form needs pairwise-disjoint structures");
    ensure!(!spec.class_members(class).is_empty(), "membership class {} is empty", class_string(class));
    let mut count = binomial(spec.n - 1, spec.p);
    for (&c, k) in class.iter().zip(spec.levels()) {
        if c {
            count -= binomial(k - 1, spec.p);
        } else {
            count += upper_levels(k, spec.p);
        }
    }
    Ok(count)
}

pub fn theorem2_influence(spec: &IdealSpec, class: &[bool]) -> Result<BigRational> {
    Ok(count_to_influence(theorem2_boundary_count(spec, class)?, spec.n))
}

/// Outlier minus inlier influence of an ideal single structure.
pub fn corollary1_gap(n: usize, p: usize, k: usize) -> Result<BigRational> {
    ensure!(p < k && k < n, "need p < k < n, got n = {n}, p = {p}, k = {k}");
    Ok(count_to_influence(upper_levels(k, p) + binomial(k - 1, p), n))
}

fn class_string(class: &[bool]) -> String {
    class.iter().map(|&c| if c { '1' } else { '0' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolean::{influence_exact_rational, TruthTable};
    use proptest::prelude::*;

    fn mask(s: &str) -> SubsetMask {
        s.parse().unwrap()
    }

    fn r(num: i64, den: i64) -> BigRational {
        BigRational::new(num.into(), den.into())
    }

    #[test]
    fn single_structure_colouring() {
        let f = ideal_mbf(&IdealSpec::single(5, 2, 4).unwrap());
        assert!(!f.eval(&mask("11110")));
        assert!(f.eval(&mask("11111")));
        assert!(f.eval(&mask("11001")));
        assert!(!f.eval(&mask("10001")));
    }

    #[test]
    fn two_structures() {
        let spec = IdealSpec::new(8, 2, vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]]).unwrap();
        let f = ideal_mbf(&spec);
        assert!(!f.eval(&mask("11110000")));
        assert!(!f.eval(&mask("00001111")));
        assert!(f.eval(&mask("11111000")));
        assert!(TruthTable::tabulate(&f).unwrap().is_monotone());
    }

    #[test]
    fn overlap_above_p_is_rejected() {
        assert!(IdealSpec::new(8, 2, vec![vec![0, 1, 2, 3], vec![1, 2, 3, 4]]).is_err());
        assert!(IdealSpec::new(8, 2, vec![vec![0, 1, 2, 3], vec![2, 3, 4, 5]]).is_ok());
        assert!(IdealSpec::new(8, 2, vec![vec![0, 1]]).is_err());
    }

    #[test]
    fn small_instance_formulas() {
        assert_eq!(theorem1_boundary_count(5, 2, 4, true).unwrap(), BigInt::from(3));
        assert_eq!(theorem1_boundary_count(5, 2, 4, false).unwrap(), BigInt::from(11));
        assert_eq!(theorem1_influence(5, 2, 4, true).unwrap(), r(6, 32));
        assert_eq!(corollary1_gap(5, 2, 4).unwrap(), r(16, 32));
        assert_eq!(theorem1_boundary_count(6, 2, 6, true).unwrap(), BigInt::zero());
        assert!(theorem1_influence(6, 2, 6, false).is_err());
        assert!(theorem1_influence(6, 3, 3, true).is_err());
    }

    #[test]
    fn enumeration_matches_small_instance() {
        let f = ideal_mbf(&IdealSpec::single(5, 2, 4).unwrap());
        let exact = influence_exact_rational(&f).unwrap();
        assert_eq!(exact[..4], vec![r(6, 32); 4][..]);
        assert_eq!(exact[4], r(22, 32));
    }

    #[test]
    fn classes_and_empty_class() {
        let spec = IdealSpec::new(10, 2, vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]]).unwrap();
        assert_eq!(spec.classes().len(), 3);
        assert_eq!(spec.outliers(), vec![8, 9]);
        assert!(theorem2_influence(&spec, &[true, true]).is_err());
        let out = theorem2_influence(&spec, &[false, false]).unwrap();
        assert!(out > theorem2_influence(&spec, &[true, false]).unwrap());
        assert!(out > theorem2_influence(&spec, &[false, true]).unwrap());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), BigInt::from(10));
        assert_eq!(binomial(3, 5), BigInt::zero());
        assert_eq!(binomial(60, 30), BigInt::from(118264581564861424u64));
    }

    proptest! {
        #[test]
        fn single_structure_reduces_to_first_closed_form(n in 3usize..12, p in 1usize..3, extra in 1usize..9) {
            let k = (p + extra).min(n);
            prop_assume!(p < k && k < n);
            let spec = IdealSpec::single(n, p, k).unwrap();
            prop_assert_eq!(
                theorem2_influence(&spec, &[true]).unwrap(),
                theorem1_influence(n, p, k, true).unwrap()
            );
            prop_assert_eq!(
                theorem2_influence(&spec, &[false]).unwrap(),
                theorem1_influence(n, p, k, false).unwrap()
            );
        }
    }
}
