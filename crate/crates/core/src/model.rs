//! Linear-residual fitting problems: data, residuals, synthetic generators
//! and the CSV dataset format.
//!
//! A point `i` has features `x_i ∈ R^p` and target `y_i`; its residual under
//! parameters `θ` is `|x_i·θ − y_i|`. A 2D line `y = a·x + b` is encoded with
//! features `(x, 1)` and parameters `(a, b)`.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::seed;

/// Ground-truth tag of a generated point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    /// Inlier of the structure with the given id.
    Inlier(u32),
    Outlier,
}

impl Label {
    pub fn is_inlier(self) -> bool {
        matches!(self, Label::Inlier(_))
    }

    /// CSV encoding: structure id for inliers, `-1` for outliers.
    pub fn code(self) -> i64 {
        match self {
            Label::Inlier(id) => id as i64,
            Label::Outlier => -1,
        }
    }

    pub fn from_code(code: i64) -> Result<Self> {
        match code {
            -1 => Ok(Label::Outlier),
            c if c >= 0 && c <= u32::MAX as i64 => Ok(Label::Inlier(c as u32)),
            c => Err(Error::invalid(format!("invalid label code {c}"))),
        }
    }
}

/// Inlier threshold `ε` in residual units.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Tolerance(f64);

impl Tolerance {
    pub fn new(epsilon: f64) -> Result<Self> {
        ensure!(epsilon.is_finite() && epsilon >= 0.0, "tolerance must be finite and nonnegative, got {epsilon}");
        Ok(Tolerance(epsilon))
    }

    pub fn epsilon(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Tolerance {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Tolerance::new(v)
    }
}

impl From<Tolerance> for f64 {
    fn from(t: Tolerance) -> f64 {
        t.0
    }
}

/// Fitted model parameters `θ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelParams {
    pub theta: Vec<f64>,
}

impl ModelParams {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        ensure!(theta.iter().all(|v| v.is_finite()), "model parameters must be finite");
        Ok(ModelParams { theta })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

/// `n` points of a linear-residual model with `p` parameters.
#[derive(Clone, PartialEq)]
pub struct Dataset {
    p: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
    labels: Option<Vec<Label>>,
}

impl fmt::Debug for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dataset")
            .field("n", &self.n())
            .field("p", &self.p)
            .field("labelled", &self.labels.is_some())
            .finish()
    }
}

impl Dataset {
    /// `features` is row-major `n × p`.
    pub fn new(features: Vec<f64>, p: usize, targets: Vec<f64>, labels: Option<Vec<Label>>) -> Result<Self> {
        ensure!(p >= 1, "model dimension must be at least 1");
        let n = targets.len();
        ensure!(n >= 1, "dataset must contain at least one point");
        ensure!(features.len() == n * p, "feature matrix has {} entries, expected {n}×{p}", features.len());
        ensure!(features.iter().all(|v| v.is_finite()), "features must be finite");
        ensure!(targets.iter().all(|v| v.is_finite()), "targets must be finite");
        if let Some(labels) = &labels {
            ensure!(labels.len() == n, "labels have length {}, expected {n}", labels.len());
        }
        Ok(Dataset {
            p,
            features,
            targets,
            labels,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], targets: Vec<f64>) -> Result<Self> {
        ensure!(!rows.is_empty(), "dataset must contain at least one point");
        let p = rows[0].len();
        ensure!(rows.iter().all(|r| r.len() == p), "feature rows have differing lengths");
        Dataset::new(rows.concat(), p, targets, None)
    }

    /// 2D points `(x, y)` for the line model `y = a·x + b`.
    pub fn from_line_points(points: &[(f64, f64)]) -> Result<Self> {
        let features = points.iter().flat_map(|&(x, _)| [x, 1.0]).collect();
        let targets = points.iter().map(|&(_, y)| y).collect();
        Dataset::new(features, 2, targets, None)
    }

    pub fn with_labels(mut self, labels: Vec<Label>) -> Result<Self> {
        ensure!(labels.len() == self.n(), "labels have length {}, expected {}", labels.len(), self.n());
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.targets.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn labels(&self) -> Option<&[Label]> {
        self.labels.as_deref()
    }

    pub fn inlier_count(&self) -> Option<usize> {
        self.labels().map(|l| l.iter().filter(|l| l.is_inlier()).count())
    }

    /// `x_i·θ − y_i`, without bounds checks beyond slicing.
    #[inline]
    pub(crate) fn signed_residual(&self, i: usize, theta: &[f64]) -> f64 {
        let row = self.row(i);
        let mut acc = -self.targets[i];
        for (a, b) in row.iter().zip(theta) {
            acc += a * b;
        }
        acc
    }

    /// Absolute residual `|x_i·θ − y_i|`.
    pub fn residual(&self, i: usize, theta: &ModelParams) -> Result<f64> {
        ensure!(i < self.n(), "point index {i} out of range for dataset of {} points", self.n());
        ensure!(theta.dim() == self.p, "parameter vector has length {}, expected {}", theta.dim(), self.p);
        Ok(self.signed_residual(i, &theta.theta).abs())
    }

    /// Indices whose residual under `theta` is at most `tol`.
    pub fn consensus(&self, theta: &[f64], tol: Tolerance) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| self.signed_residual(i, theta).abs() <= tol.epsilon())
            .collect()
    }

    /// Writes the CSV form: header `x1,…,xp,y[,label]`, one row per point.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.p).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        if self.labels.is_some() {
            header.push("label".into());
        }
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut record: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            record.push(self.targets[i].to_string());
            if let Some(labels) = &self.labels {
                record.push(labels[i].code().to_string());
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let header = r.headers()?.clone();
        let cols: Vec<&str> = header.iter().collect();
        let has_label = cols.last() == Some(&"label");
        let y_col = if has_label { cols.len().checked_sub(2) } else { cols.len().checked_sub(1) };
        let y_col = y_col.ok_or_else(|| Error::invalid("CSV header is empty"))?;
        ensure!(cols[y_col] == "y", "expected column `y` at position {}, found {:?}", y_col + 1, cols[y_col]);
        let p = y_col;
        ensure!(p >= 1, "CSV needs at least one feature column");
        for (j, name) in cols[..p].iter().enumerate() {
            ensure!(*name == format!("x{}", j + 1), "expected column `x{}`, found {name:?}", j + 1);
        }
        let mut features = Vec::new();
        let mut targets = Vec::new();
        let mut labels = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record?;
            ensure!(record.len() == cols.len(), "row {} has {} fields, expected {}", line + 1, record.len(), cols.len());
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("row {}: cannot parse {s:?} as a number", line + 1)))
            };
            for j in 0..p {
                features.push(parse(&record[j])?);
            }
            targets.push(parse(&record[p])?);
            if has_label {
                let code = record[p + 1]
                    .parse::<i64>()
                    .map_err(|_| Error::invalid(format!("row {}: invalid label {:?}", line + 1, &record[p + 1])))?;
                labels.push(Label::from_code(code)?);
            }
        }
        Dataset::new(features, p, targets, has_label.then_some(labels))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Dataset::read_csv(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// How inliers and outliers are perturbed off the true model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corruption {
    /// Inliers move by `U[−inlier_noise, inlier_noise]`.
    pub inlier_noise: f64,
    /// Outliers move by a magnitude uniform on `(inner, outer]` with random sign.
    pub outlier_range: (f64, f64),
}

impl Default for Corruption {
    fn default() -> Self {
        Corruption {
            inlier_noise: 0.1,
            outlier_range: (0.1, 5.0),
        }
    }
}

impl Corruption {
    fn validate(&self) -> Result<()> {
        let (inner, outer) = self.outlier_range;
        ensure!(self.inlier_noise.is_finite() && self.inlier_noise >= 0.0, "inlier noise must be nonnegative");
        ensure!(inner > 0.0 && inner < outer && outer.is_finite(), "outlier range must satisfy 0 < inner < outer");
        Ok(())
    }

    fn inlier_offset<R: Rng>(&self, rng: &mut R) -> f64 {
        self.inlier_noise * (2.0 * rng.random::<f64>() - 1.0)
    }

    fn outlier_offset<R: Rng>(&self, rng: &mut R) -> f64 {
        let (inner, outer) = self.outlier_range;
        // outer − u·(outer − inner) with u ∈ [0, 1) lands in (inner, outer].
        let magnitude = outer - rng.random::<f64>() * (outer - inner);
        if rng.random::<bool>() {
            magnitude
        } else {
            -magnitude
        }
    }
}

/// A generated dataset together with the model it was drawn from.
#[derive(Clone, Debug)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub theta: ModelParams,
}

/// Number of outliers for a fraction of `n`: nearest integer, ties up.
pub fn outlier_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction) + 0.5).floor() as usize
}

/// Random line `y = a·x + b` with `(a, b) ~ U[−1,1]²` and `x ~ U[−1,1]`.
pub fn generate_line2d(n: usize, outlier_fraction: f64, corruption: Corruption, seed: u64) -> Result<Synthetic> {
    ensure!((0.0..1.0).contains(&outlier_fraction), "outlier fraction must lie in [0, 1)");
    ensure!(n >= 1, "need at least one point");
    corruption.validate()?;
    let mut rng = seed::rng(seed);
    let theta = vec![rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let features: Vec<f64> = xs.iter().flat_map(|&x| [x, 1.0]).collect();
    corrupt(features, 2, theta, outlier_count(n, outlier_fraction), corruption, &mut rng)
}

/// Random model `θ ~ U[−1,1]^p` over features `(x_1, …, x_{p−1}, 1)` with
/// `x_j ~ U[−1,1]`, and exactly `n_outliers` corrupted points.
pub fn generate_linear(n: usize, p: usize, n_outliers: usize, corruption: Corruption, seed: u64) -> Result<Synthetic> {
    ensure!(p >= 1, "model dimension must be at least 1");
    ensure!(n_outliers < n, "need fewer outliers ({n_outliers}) than points ({n})");
    corruption.validate()?;
    let mut rng = seed::rng(seed);
    let theta: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut features = Vec::with_capacity(n * p);
    for _ in 0..n {
        for _ in 0..p - 1 {
            features.push(rng.random_range(-1.0..=1.0));
        }
        features.push(1.0);
    }
    corrupt(features, p, theta, n_outliers, corruption, &mut rng)
}

fn corrupt<R: Rng>(
    features: Vec<f64>,
    p: usize,
    theta: Vec<f64>,
    n_outliers: usize,
    corruption: Corruption,
    rng: &mut R,
) -> Result<Synthetic> {
    let n = features.len() / p;
    let mut labels = vec![Label::Inlier(0); n];
    for i in sample(rng, n, n_outliers) {
        labels[i] = Label::Outlier;
    }
    let targets = (0..n)
        .map(|i| {
            let clean: f64 = features[i * p..(i + 1) * p].iter().zip(&theta).map(|(a, b)| a * b).sum();
            let offset = match labels[i] {
                Label::Outlier => corruption.outlier_offset(rng),
                Label::Inlier(_) => corruption.inlier_offset(rng),
            };
            clean + offset
        })
        .collect();
    Ok(Synthetic {
        dataset: Dataset::new(features, p, targets, Some(labels))?,
        theta: ModelParams::new(theta)?,
    })
}
