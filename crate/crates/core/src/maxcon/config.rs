use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::model::{Dataset, Tolerance};

/// Which parts of the greedy solver are active.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Basis-restricted re-estimation every iteration, then local expansion.
    #[default]
    #[serde(rename = "full")]
    Full,
    /// Influences estimated once on the full set; points removed in
    /// descending order until feasible.
    #[serde(rename = "nR")]
    NoReestimation,
    /// Influences of every remaining point re-estimated each iteration.
    #[serde(rename = "nB")]
    NoBasis,
    /// As `Full` without local expansion.
    #[serde(rename = "nL")]
    NoLocalExpansion,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::NoReestimation,
        Variant::NoBasis,
        Variant::NoLocalExpansion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoReestimation => "nR",
            Variant::NoBasis => "nB",
            Variant::NoLocalExpansion => "nL",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown variant {s:?}, expected one of full, nR, nB, nL")))
    }
}

pub const DEFAULT_M: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxConConfig {
    pub epsilon: Tolerance,
    /// Samples per influence estimate.
    pub m: usize,
    /// Bernoulli parameter; `None` picks `max((p+1)/n, 0.1)` for the dataset.
    pub q: Option<f64>,
    pub seed: u64,
    pub variant: Variant,
    pub local_expansion: bool,
}

impl MaxConConfig {
    pub fn new(epsilon: Tolerance, seed: u64) -> Self {
        MaxConConfig {
            epsilon,
            m: DEFAULT_M,
            q: None,
            seed,
            variant: Variant::Full,
            local_expansion: true,
        }
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.q = Some(q);
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_local_expansion(mut self, on: bool) -> Self {
        self.local_expansion = on;
        self
    }

    /// The Bernoulli parameter used on `dataset`.
    pub fn resolved_q(&self, dataset: &Dataset) -> f64 {
        self.q.unwrap_or_else(|| default_q(dataset.n(), dataset.p()))
    }

    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        ensure!(self.m >= 1, "m must be at least 1");
        let q = self.resolved_q(dataset);
        ensure!(q > 0.0 && q < 1.0, "q must lie in (0, 1), got {q}");
        let low = (dataset.p() + 1) as f64 / dataset.n() as f64;
        if q < low || q > 0.3 {
            log::warn!("q = {q} is outside the recommended range [{low:.3}, 0.3]");
        }
        Ok(())
    }
}

pub fn default_q(n: usize, p: usize) -> f64 {
    ((p + 1) as f64 / n as f64).max(0.1)
}
