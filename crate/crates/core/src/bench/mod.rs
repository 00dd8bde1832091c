//! Seeded experiment drivers for the synthetic studies, with tidy CSV output.
//!
//! Every row carries the seed it was produced from, the crate version and a
//! hash of the experiment spec. Apart from `wall_secs` columns, re-running a
//! spec reproduces its table byte for byte.

mod report;

pub use report::{affine_fit, aggregate, percentile, read_dir, trends, AffineFit, AggregateRow, Tables, TrendRow};

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boolean::{
    influence_exact, influence_mse, influence_sampled, is_upper_zero, max_upper_zero_exhaustive, separation,
    SamplingOptions, TruthTable, EXHAUSTIVE_MAX_N,
};
use crate::error::{ensure, Result};
use crate::feasibility::FeasibilityOracle;
use crate::mask::SubsetMask;
use crate::maxcon::{
    lo_ransac_with_budget, mbf_maxcon_variant, ransac_with_budget, Budget, MaxConConfig, MaxConResult, Variant,
};
use crate::model::{generate_line2d, generate_linear, Corruption, Dataset, Tolerance};
use crate::seed;

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

const SAMPLE_DOMAIN: u64 = 0x53414d50;
const SOLVER_DOMAIN: u64 = 0x534f4c56;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    InfluenceError,
    Separation,
    Ablation,
    Comparison,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::InfluenceError => "influence_error",
            ExperimentKind::Separation => "separation",
            ExperimentKind::Ablation => "ablation",
            ExperimentKind::Comparison => "comparison",
        }
    }
}

/// Parameter lists swept by an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    /// Instance seeds, one instance per seed.
    pub seeds: Vec<u64>,
    /// Samples per estimate (influence studies).
    #[serde(default = "default_m_grid")]
    pub m: Vec<usize>,
    /// Bernoulli parameters (influence studies).
    #[serde(default = "default_q_grid")]
    pub q: Vec<f64>,
    /// Outlier counts (solver studies).
    #[serde(default = "default_outlier_grid")]
    pub outliers: Vec<usize>,
    /// Solver variants (ablation).
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
}

fn default_m_grid() -> Vec<usize> {
    vec![1000]
}

fn default_q_grid() -> Vec<f64> {
    vec![0.5]
}

fn default_outlier_grid() -> Vec<usize> {
    vec![5]
}

fn default_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

/// Synthetic instance family. Unset sizes default per experiment kind:
/// `n = 15, p = 2` for influence studies, `n = 20, p = 8` for solver studies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub n: Option<usize>,
    pub p: Option<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Outlier share of the line instances used by influence studies.
    #[serde(default = "default_outlier_fraction")]
    pub outlier_fraction: f64,
    #[serde(default)]
    pub corruption: Corruption,
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_outlier_fraction() -> f64 {
    0.25
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec {
            n: None,
            p: None,
            epsilon: default_epsilon(),
            outlier_fraction: default_outlier_fraction(),
            corruption: Corruption::default(),
        }
    }
}

/// What matched budget the RANSAC baselines get in a comparison.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    /// As many hypotheses as the greedy run spent feasibility evaluations.
    #[default]
    OracleCalls,
    /// The greedy run's wall time. Rows are then not reproducible.
    WallTime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_solver_m")]
    pub m: usize,
    /// `None` uses `max((p+1)/n, 0.1)`.
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default = "default_true")]
    pub local_expansion: bool,
    #[serde(default)]
    pub budget: BudgetMode,
}

fn default_solver_m() -> usize {
    crate::maxcon::DEFAULT_M
}

fn default_true() -> bool {
    true
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            m: default_solver_m(),
            q: None,
            local_expansion: true,
            budget: BudgetMode::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub grid: Grid,
    #[serde(default)]
    pub instance: InstanceSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    /// File name of the result table, relative to the output directory.
    #[serde(default)]
    pub output_path: Option<String>,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, seeds: Vec<u64>) -> Self {
        ExperimentSpec {
            kind,
            grid: Grid {
                seeds,
                m: default_m_grid(),
                q: default_q_grid(),
                outliers: default_outlier_grid(),
                variants: default_variants(),
            },
            instance: InstanceSpec::default(),
            solver: SolverSpec::default(),
            output_path: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn is_influence_study(&self) -> bool {
        matches!(self.kind, ExperimentKind::InfluenceError | ExperimentKind::Separation)
    }

    pub fn n(&self) -> usize {
        self.instance.n.unwrap_or(if self.is_influence_study() { 15 } else { 20 })
    }

    pub fn p(&self) -> usize {
        self.instance.p.unwrap_or(if self.is_influence_study() { 2 } else { 8 })
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        ensure!(!g.seeds.is_empty(), "experiment grid needs at least one seed");
        Tolerance::new(self.instance.epsilon)?;
        if self.is_influence_study() {
            ensure!(!g.m.is_empty() && !g.q.is_empty(), "influence studies need non-empty m and q grids");
            ensure!(g.m.iter().all(|&m| m >= 1), "every m must be at least 1");
            ensure!(g.q.iter().all(|&q| q > 0.0 && q < 1.0), "every q must lie in (0, 1)");
            ensure!(self.p() == 2, "influence studies use 2D line instances (p = 2)");
            ensure!(
                self.n() <= EXHAUSTIVE_MAX_N,
                "influence studies need exact influences, so n ≤ {EXHAUSTIVE_MAX_N}"
            );
        } else {
            ensure!(!g.outliers.is_empty(), "solver studies need a non-empty outlier grid");
            ensure!(g.outliers.iter().all(|&o| o < self.n()), "outlier counts must be below n");
            ensure!(self.solver.m >= 1, "solver m must be at least 1");
            if self.kind == ExperimentKind::Ablation {
                ensure!(!g.variants.is_empty(), "ablation needs at least one variant");
            }
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of this experiment's JSON form.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serialises");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    pub fn output_file(&self) -> String {
        self.output_path.clone().unwrap_or_else(|| format!("{}.csv", self.kind.name()))
    }
}

/// One (seed, m, q) cell of an influence study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceRow {
    pub experiment: String,
    pub seed: u64,
    pub m: usize,
    pub q: f64,
    pub n: usize,
    pub n_outliers: usize,
    pub mse: f64,
    pub separation: f64,
    /// Separation of the exact flip-probability influences.
    pub exact_separation: f64,
    pub version: String,
    pub config_hash: String,
}

/// One solver run of an ablation or comparison study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverRow {
    pub experiment: String,
    pub seed: u64,
    pub method: String,
    pub n: usize,
    pub p: usize,
    pub n_outliers: usize,
    pub consensus: usize,
    pub reference: usize,
    /// `exhaustive` (certified optimum) or `labels` (generated inlier count).
    pub reference_kind: String,
    pub deficit: i64,
    pub removals: usize,
    pub oracle_calls: u64,
    pub lp_solves: u64,
    pub hypotheses: u64,
    /// Local expansion ran on this result.
    pub expanded: bool,
    /// Independent single-step check of the returned mask.
    pub upper_zero: bool,
    pub wall_secs: f64,
    pub version: String,
    pub config_hash: String,
}

/// Result table of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub enum ResultTable {
    Influence(Vec<InfluenceRow>),
    Solver(Vec<SolverRow>),
}

impl ResultTable {
    pub fn len(&self) -> usize {
        match self {
            ResultTable::Influence(rows) => rows.len(),
            ResultTable::Solver(rows) => rows.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        match self {
            ResultTable::Influence(rows) => write_rows(writer, rows),
            ResultTable::Solver(rows) => write_rows(writer, rows),
        }
    }
}

pub fn write_rows<W: std::io::Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: std::io::Read, T: DeserializeOwned>(reader: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(reader);
    let rows = r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?;
    Ok(rows)
}

struct InfluenceInstance {
    seed: u64,
    n_outliers: usize,
    labels: Vec<crate::model::Label>,
    table: TruthTable,
}

fn influence_instance(spec: &ExperimentSpec, seed: u64) -> Result<InfluenceInstance> {
    let synth = generate_line2d(spec.n(), spec.instance.outlier_fraction, spec.instance.corruption, seed)?;
    let tol = Tolerance::new(spec.instance.epsilon)?;
    let oracle = FeasibilityOracle::new(&synth.dataset, tol);
    let table = TruthTable::tabulate_monotone(&oracle)?;
    let labels = synth.dataset.labels().expect("generated data is labelled").to_vec();
    Ok(InfluenceInstance {
        seed,
        n_outliers: labels.iter().filter(|l| !l.is_inlier()).count(),
        labels,
        table,
    })
}

/// Estimation error against exact influences over the (seed, m, q) grid.
pub fn run_influence_error(spec: &ExperimentSpec) -> Result<Vec<InfluenceRow>> {
    ensure!(spec.kind == ExperimentKind::InfluenceError, "spec kind is {}, not influence_error", spec.kind.name());
    run_influence_study(spec)
}

/// Inlier/outlier separation of estimated influences over the grid.
pub fn run_separation(spec: &ExperimentSpec) -> Result<Vec<InfluenceRow>> {
    ensure!(spec.kind == ExperimentKind::Separation, "spec kind is {}, not separation", spec.kind.name());
    run_influence_study(spec)
}

fn run_influence_study(spec: &ExperimentSpec) -> Result<Vec<InfluenceRow>> {
    spec.validate()?;
    let hash = spec.config_hash();
    let n = spec.n();
    let per_seed: Vec<Vec<InfluenceRow>> = spec
        .grid
        .seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<InfluenceRow>> {
            let inst = influence_instance(spec, seed)?;
            let exact = influence_exact(&inst.table)?;
            let exact_separation = separation(&exact, &inst.labels)?;
            let all: Vec<usize> = (0..n).collect();
            let sample_seed = seed::derive(inst.seed, SAMPLE_DOMAIN, 0);
            let mut rows = Vec::new();
            for &m in &spec.grid.m {
                for &q in &spec.grid.q {
                    let est =
                        influence_sampled(&inst.table, &SubsetMask::full(n), &all, SamplingOptions::new(m, q, sample_seed))?;
                    rows.push(InfluenceRow {
                        experiment: spec.kind.name().to_string(),
                        seed,
                        m,
                        q,
                        n,
                        n_outliers: inst.n_outliers,
                        mse: influence_mse(&est, &exact)?,
                        separation: separation(&est, &inst.labels)?,
                        exact_separation,
                        version: VERSION.to_string(),
                        config_hash: hash.clone(),
                    });
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

struct SolverInstance {
    dataset: Dataset,
    reference: usize,
    reference_kind: &'static str,
}

fn solver_instance(spec: &ExperimentSpec, n_outliers: usize, seed: u64) -> Result<SolverInstance> {
    let synth = generate_linear(spec.n(), spec.p(), n_outliers, spec.instance.corruption, seed)?;
    let tol = Tolerance::new(spec.instance.epsilon)?;
    let (reference, reference_kind) = if spec.n() <= EXHAUSTIVE_MAX_N {
        let oracle = FeasibilityOracle::new(&synth.dataset, tol);
        (max_upper_zero_exhaustive(&oracle)?.count(), "exhaustive")
    } else {
        (synth.dataset.inlier_count().expect("generated data is labelled"), "labels")
    };
    Ok(SolverInstance {
        dataset: synth.dataset,
        reference,
        reference_kind,
    })
}

fn solver_row(spec: &ExperimentSpec, inst: &SolverInstance, seed: u64, n_outliers: usize, res: &MaxConResult) -> Result<SolverRow> {
    let tol = Tolerance::new(spec.instance.epsilon)?;
    let oracle = FeasibilityOracle::new(&inst.dataset, tol);
    Ok(SolverRow {
        experiment: spec.kind.name().to_string(),
        seed,
        method: res.method.clone(),
        n: spec.n(),
        p: spec.p(),
        n_outliers,
        consensus: res.consensus_size(),
        reference: inst.reference,
        reference_kind: inst.reference_kind.to_string(),
        deficit: inst.reference as i64 - res.consensus_size() as i64,
        removals: res.trace.len(),
        oracle_calls: res.oracle_calls,
        lp_solves: res.lp_solves,
        hypotheses: res.hypotheses,
        expanded: res.method.starts_with("mbf-maxcon") && spec.solver.local_expansion && !res.method.ends_with("/nL"),
        upper_zero: is_upper_zero(&oracle, &res.mask),
        wall_secs: res.wall_secs,
        version: VERSION.to_string(),
        config_hash: spec.config_hash(),
    })
}

fn solver_config(spec: &ExperimentSpec, seed: u64, variant: Variant) -> Result<MaxConConfig> {
    let mut cfg = MaxConConfig::new(Tolerance::new(spec.instance.epsilon)?, seed::derive(seed, SOLVER_DOMAIN, 0))
        .with_m(spec.solver.m)
        .with_variant(variant)
        .with_local_expansion(spec.solver.local_expansion);
    cfg.q = spec.solver.q;
    Ok(cfg)
}

/// Instances of the solver studies in grid order: outlier counts outer,
/// seeds inner.
fn solver_cells(spec: &ExperimentSpec) -> Vec<(usize, u64)> {
    spec.grid
        .outliers
        .iter()
        .flat_map(|&o| spec.grid.seeds.iter().map(move |&s| (o, s)))
        .collect()
}

/// Variants × outlier counts × seeds, with consensus deficits against the
/// exhaustive optimum (or the labelled inlier count when `n > 20`).
pub fn run_ablation(spec: &ExperimentSpec) -> Result<Vec<SolverRow>> {
    ensure!(spec.kind == ExperimentKind::Ablation, "spec kind is {}, not ablation", spec.kind.name());
    spec.validate()?;
    let per_cell: Vec<Vec<SolverRow>> = solver_cells(spec)
        .par_iter()
        .map(|&(n_outliers, seed)| -> Result<Vec<SolverRow>> {
            let inst = solver_instance(spec, n_outliers, seed)?;
            spec.grid
                .variants
                .iter()
                .map(|&v| {
                    let res = mbf_maxcon_variant(&inst.dataset, &solver_config(spec, seed, v)?)?;
                    solver_row(spec, &inst, seed, n_outliers, &res)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

/// The greedy solver against RANSAC and Lo-RANSAC under a matched budget.
pub fn run_comparison(spec: &ExperimentSpec) -> Result<Vec<SolverRow>> {
    ensure!(spec.kind == ExperimentKind::Comparison, "spec kind is {}, not comparison", spec.kind.name());
    spec.validate()?;
    let tol = Tolerance::new(spec.instance.epsilon)?;
    let per_cell: Vec<Vec<SolverRow>> = solver_cells(spec)
        .par_iter()
        .map(|&(n_outliers, seed)| -> Result<Vec<SolverRow>> {
            let inst = solver_instance(spec, n_outliers, seed)?;
            let mbf = mbf_maxcon_variant(&inst.dataset, &solver_config(spec, seed, Variant::Full)?)?;
            let budget = match spec.solver.budget {
                BudgetMode::OracleCalls => Budget::Iterations(mbf.oracle_calls.max(1)),
                BudgetMode::WallTime => Budget::WallTime {
                    secs: mbf.wall_secs,
                    max_iterations: u64::MAX,
                },
            };
            let ransac_seed = seed::derive(seed, SOLVER_DOMAIN, 1);
            let plain = ransac_with_budget(&inst.dataset, tol, budget, ransac_seed)?;
            let lo = lo_ransac_with_budget(&inst.dataset, tol, budget, ransac_seed)?;
            [mbf, plain, lo].iter().map(|r| solver_row(spec, &inst, seed, n_outliers, r)).collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

pub fn run(spec: &ExperimentSpec) -> Result<ResultTable> {
    Ok(match spec.kind {
        ExperimentKind::InfluenceError => ResultTable::Influence(run_influence_error(spec)?),
        ExperimentKind::Separation => ResultTable::Influence(run_separation(spec)?),
        ExperimentKind::Ablation => ResultTable::Solver(run_ablation(spec)?),
        ExperimentKind::Comparison => ResultTable::Solver(run_comparison(spec)?),
    })
}

/// Runs `spec` and writes its table into `out_dir`. Returns the table path.
pub fn run_to_dir(spec: &ExperimentSpec, out_dir: &Path) -> Result<PathBuf> {
    let table = run(spec)?;
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(spec.output_file());
    table.write_csv(std::fs::File::create(&path)?)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_json_defaults_and_validation() {
        let spec = ExperimentSpec::from_json(r#"{"kind": "separation", "grid": {"seeds": [1, 2]}}"#).unwrap();
        assert_eq!((spec.n(), spec.p()), (15, 2));
        assert_eq!(spec.grid.m, vec![1000]);
        assert_eq!(spec.output_file(), "separation.csv");
        let ablation = ExperimentSpec::from_json(r#"{"kind": "ablation", "grid": {"seeds": [1]}}"#).unwrap();
        assert_eq!((ablation.n(), ablation.p()), (20, 8));

        assert!(ExperimentSpec::from_json(r#"{"kind": "separation", "grid": {"seeds": []}}"#).is_err());
        assert!(ExperimentSpec::from_json(r#"{"kind": "separation", "grid": {"seeds": [1], "m": [0]}}"#).is_err());
        assert!(ExperimentSpec::from_json(r#"{"kind": "separation", "grid": {"seeds": [1]}, "extra": 1}"#).is_err());
        assert!(ExperimentSpec::from_json(r#"{"kind": "separation", "grid": {"seeds": [1]}, "instance": {"n": 21}}"#).is_err());
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = ExperimentSpec::new(ExperimentKind::Ablation, vec![1]);
        let mut b = a.clone();
        assert_eq!(a.config_hash(), b.config_hash());
        b.grid.seeds.push(2);
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 16);
    }

    #[test]
    fn influence_rows_round_trip() {
        let mut spec = ExperimentSpec::new(ExperimentKind::InfluenceError, vec![3]);
        spec.grid.m = vec![10, 100];
        let rows = run_influence_error(&spec).unwrap();
        assert_eq!(rows.len(), 2);
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows).unwrap();
        let back: Vec<InfluenceRow> = read_rows(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
        assert!(run_separation(&spec).is_err());
    }

    #[test]
    fn zero_outlier_ablation_has_no_deficit() {
        let mut spec = ExperimentSpec::new(ExperimentKind::Ablation, vec![0, 1]);
        spec.instance.n = Some(12);
        spec.instance.p = Some(3);
        spec.grid.outliers = vec![0];
        spec.solver.m = 50;
        let rows = run_ablation(&spec).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r.deficit == 0 && r.removals == 0));
    }
}
