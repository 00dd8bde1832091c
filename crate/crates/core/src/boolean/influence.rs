use std::io::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BooleanFunction, TruthTable, TABLE_MAX_N};
use crate::error::{ensure, Result};
use crate::mask::SubsetMask;
use crate::model::Label;
use crate::seed;

/// Per-point influence values with the parameters that produced them.
///
/// `values[i]` is `None` for points that were not estimated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceVector {
    pub values: Vec<Option<f64>>,
    /// Samples per point; `None` for exact enumeration.
    pub m: Option<usize>,
    pub q: f64,
    pub seed: Option<u64>,
    /// Points free to vary during estimation; the rest were pinned to 0.
    pub scope: SubsetMask,
}

impl InfluenceVector {
    pub fn get(&self, i: usize) -> Option<f64> {
        self.values.get(i).copied().flatten()
    }

    /// `(index, value)` for every estimated point.
    pub fn defined(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v)))
    }

    /// Index of the largest value, lowest index on ties.
    pub fn argmax(&self) -> Option<usize> {
        self.defined()
            .fold(None, |best: Option<(usize, f64)>, (i, v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((i, v)),
            })
            .map(|(i, _)| i)
    }

    /// CSV with header `index,value`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["index", "value"])?;
        for (i, v) in self.defined() {
            w.write_record([i.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Exact `#{x ∈ {0,1}^n : f(x) ≠ f(x^{⊕i})}` for every coordinate.
pub fn influence_exact_counts<F: BooleanFunction + ?Sized>(f: &F) -> Result<Vec<u64>> {
    ensure!(f.arity() <= TABLE_MAX_N, "exact influence needs n ≤ {TABLE_MAX_N}, got {}", f.arity());
    Ok(TruthTable::tabulate(f)?.flip_counts())
}

/// Exact influences `Pr_{x uniform}[f(x) ≠ f(x^{⊕i})]` as rationals.
pub fn influence_exact_rational<F: BooleanFunction + ?Sized>(f: &F) -> Result<Vec<BigRational>> {
    let n = f.arity();
    let denom = BigInt::from(1u8) << n;
    Ok(influence_exact_counts(f)?
        .into_iter()
        .map(|c| BigRational::new(BigInt::from(c), denom.clone()))
        .collect())
}

/// Exact influences by enumerating all `2^n` vertices.
pub fn influence_exact<F: BooleanFunction + ?Sized>(f: &F) -> Result<InfluenceVector> {
    let n = f.arity();
    let denom = (1u64 << n) as f64;
    let values = influence_exact_counts(f)?.into_iter().map(|c| Some(c as f64 / denom)).collect();
    Ok(InfluenceVector {
        values,
        m: None,
        q: 0.5,
        seed: None,
        scope: SubsetMask::full(n),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingOptions {
    /// Samples per point.
    pub m: usize,
    /// Probability that an in-scope bit is 1.
    pub q: f64,
    pub seed: u64,
    /// Skip the second evaluation when monotonicity already decides it.
    pub monotone_shortcut: bool,
}

impl SamplingOptions {
    pub fn new(m: usize, q: f64, seed: u64) -> Self {
        SamplingOptions {
            m,
            q,
            seed,
            monotone_shortcut: true,
        }
    }
}

/// Monte Carlo estimate of `Pr_{x∼μ_q}[f(x) ≠ f(x^{⊕i})]` for each target.
///
/// Bits outside `scope` stay 0 in every sample. Each target `i` draws its own
/// `m` vectors from stream `i` of `opts.seed`, so targets can run in any
/// order or in parallel with identical results.
pub fn influence_sampled<F: BooleanFunction + ?Sized>(
    f: &F,
    scope: &SubsetMask,
    targets: &[usize],
    opts: SamplingOptions,
) -> Result<InfluenceVector> {
    let n = f.arity();
    ensure!(scope.len() == n, "scope length {} does not match function arity {n}", scope.len());
    ensure!(opts.q > 0.0 && opts.q < 1.0, "q must lie in (0, 1), got {}", opts.q);
    ensure!(opts.m >= 1, "need at least one sample per point");
    for &i in targets {
        ensure!(i < n && scope.get(i), "target {i} is outside the estimation scope");
    }
    let free: Vec<usize> = scope.indices();
    let estimates: Vec<(usize, f64)> = targets
        .par_iter()
        .map(|&i| (i, estimate_one(f, &free, i, opts)))
        .collect();
    let mut values = vec![None; n];
    for (i, v) in estimates {
        values[i] = Some(v);
    }
    Ok(InfluenceVector {
        values,
        m: Some(opts.m),
        q: opts.q,
        seed: Some(opts.seed),
        scope: scope.clone(),
    })
}

fn estimate_one<F: BooleanFunction + ?Sized>(f: &F, free: &[usize], i: usize, opts: SamplingOptions) -> f64 {
    let n = f.arity();
    let mut rng = seed::stream_rng(opts.seed, i as u64);
    let mut flips = 0usize;
    for _ in 0..opts.m {
        let mut x = SubsetMask::empty(n);
        for &j in free {
            if rng.random_bool(opts.q) {
                x.set(j);
            }
        }
        let fx = f.eval(&x);
        // f(x) = 0 with x_i = 1: removing i keeps it 0.
        // f(x) = 1 with x_i = 0: adding i keeps it 1.
        if opts.monotone_shortcut && fx == !x.get(i) {
            continue;
        }
        if fx != f.eval(&x.flipped(i)) {
            flips += 1;
        }
    }
    flips as f64 / opts.m as f64
}

/// Mean squared difference over the estimated points.
pub fn influence_mse(estimated: &InfluenceVector, exact: &InfluenceVector) -> Result<f64> {
    ensure!(estimated.scope == exact.scope, "influence vectors have different scopes");
    ensure!(estimated.values.len() == exact.values.len(), "influence vectors have different lengths");
    let mut sum = 0.0;
    let mut count = 0usize;
    for (a, b) in estimated.values.iter().zip(&exact.values) {
        match (a, b) {
            (Some(a), Some(b)) => {
                sum += (a - b) * (a - b);
                count += 1;
            }
            (None, None) => {}
            _ => return Err(crate::Error::invalid("influence vectors cover different points")),
        }
    }
    ensure!(count > 0, "no influence values to compare");
    Ok(sum / count as f64)
}

/// `min_{outliers} Inf − min_{inliers} Inf` over the estimated points.
pub fn separation(influences: &InfluenceVector, labels: &[Label]) -> Result<f64> {
    ensure!(labels.len() == influences.values.len(), "labels do not match the influence vector");
    let mut min_in = f64::INFINITY;
    let mut min_out = f64::INFINITY;
    for (i, v) in influences.defined() {
        if labels[i].is_inlier() {
            min_in = min_in.min(v);
        } else {
            min_out = min_out.min(v);
        }
    }
    ensure!(min_in.is_finite(), "separation needs at least one inlier");
    ensure!(min_out.is_finite(), "separation needs at least one outlier");
    Ok(min_out - min_in)
}
