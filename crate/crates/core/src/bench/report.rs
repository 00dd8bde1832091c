use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_rows, InfluenceRow, SolverRow};
use crate::error::{ensure, Result};

/// Summary statistics of one metric within one group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub experiment: String,
    pub method: Option<String>,
    pub m: Option<usize>,
    pub q: Option<f64>,
    pub n_outliers: Option<usize>,
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p05: f64,
    pub p95: f64,
}

/// Least-squares line `y = slope·x + intercept` through per-outlier-count
/// means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub experiment: String,
    pub method: String,
    pub metric: String,
    pub points: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Every result table found in a directory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tables {
    pub influence: Vec<InfluenceRow>,
    pub solver: Vec<SolverRow>,
}

/// Loads every `*.csv` in `dir` whose header matches a result row type.
/// Other CSV files are skipped.
pub fn read_dir(dir: &Path) -> Result<Tables> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "csv"));
    paths.sort();
    let mut tables = Tables::default();
    for path in paths {
        let header = csv::Reader::from_path(&path)?.headers()?.clone();
        let has = |name: &str| header.iter().any(|h| h == name);
        if has("mse") && has("config_hash") {
            tables.influence.extend(read_rows::<_, InfluenceRow>(std::fs::File::open(&path)?)?);
        } else if has("deficit") && has("config_hash") {
            tables.solver.extend(read_rows::<_, SolverRow>(std::fs::File::open(&path)?)?);
        } else {
            log::debug!("skipping {}: not a result table", path.display());
        }
    }
    Ok(tables)
}

/// Linear-interpolation percentile of `values` at `p ∈ [0, 1]`.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarise(key: &GroupKey, metric: &str, values: &[f64]) -> AggregateRow {
    AggregateRow {
        experiment: key.experiment.clone(),
        method: key.method.clone(),
        m: key.m,
        q: key.q.map(f64::from_bits),
        n_outliers: key.n_outliers,
        metric: metric.to_string(),
        count: values.len(),
        mean: values.iter().sum::<f64>() / values.len() as f64,
        median: percentile(values, 0.5),
        p05: percentile(values, 0.05),
        p95: percentile(values, 0.95),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct GroupKey {
    experiment: String,
    method: Option<String>,
    m: Option<usize>,
    // Bit pattern so the key is orderable; q values are never NaN.
    q: Option<u64>,
    n_outliers: Option<usize>,
}

/// Per-group percentiles of every numeric outcome.
pub fn aggregate(tables: &Tables) -> Vec<AggregateRow> {
    let mut out = Vec::new();
    let mut groups: BTreeMap<GroupKey, Vec<&InfluenceRow>> = BTreeMap::new();
    for r in &tables.influence {
        let key = GroupKey {
            experiment: r.experiment.clone(),
            method: None,
            m: Some(r.m),
            q: Some(r.q.to_bits()),
            n_outliers: None,
        };
        groups.entry(key).or_default().push(r);
    }
    for (key, rows) in &groups {
        out.push(summarise(key, "mse", &rows.iter().map(|r| r.mse).collect::<Vec<_>>()));
        out.push(summarise(key, "separation", &rows.iter().map(|r| r.separation).collect::<Vec<_>>()));
    }

    let mut groups: BTreeMap<GroupKey, Vec<&SolverRow>> = BTreeMap::new();
    for r in &tables.solver {
        let key = GroupKey {
            experiment: r.experiment.clone(),
            method: Some(r.method.clone()),
            m: None,
            q: None,
            n_outliers: Some(r.n_outliers),
        };
        groups.entry(key).or_default().push(r);
    }
    for (key, rows) in &groups {
        let metric = |f: fn(&SolverRow) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<_>>();
        out.push(summarise(key, "deficit", &metric(|r| r.deficit as f64)));
        out.push(summarise(key, "consensus", &metric(|r| r.consensus as f64)));
        out.push(summarise(key, "oracle_calls", &metric(|r| r.oracle_calls as f64)));
        out.push(summarise(key, "wall_secs", &metric(|r| r.wall_secs)));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 when `y` is constant and fitted exactly.
    pub r2: f64,
}

pub fn affine_fit(xs: &[f64], ys: &[f64]) -> Result<AffineFit> {
    ensure!(xs.len() == ys.len(), "affine fit needs paired samples");
    ensure!(xs.len() >= 2, "affine fit needs at least two points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    ensure!(sxx > 0.0, "affine fit needs at least two distinct x values");
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(AffineFit { slope, intercept, r2 })
}

/// Affine trends of mean oracle calls and mean wall time against the
/// outlier count, per experiment and method.
pub fn trends(tables: &Tables) -> Vec<TrendRow> {
    let mut groups: BTreeMap<(String, String), BTreeMap<usize, Vec<&SolverRow>>> = BTreeMap::new();
    for r in &tables.solver {
        groups
            .entry((r.experiment.clone(), r.method.clone()))
            .or_default()
            .entry(r.n_outliers)
            .or_default()
            .push(r);
    }
    let mut out = Vec::new();
    for ((experiment, method), by_outliers) in groups {
        let xs: Vec<f64> = by_outliers.keys().map(|&o| o as f64).collect();
        let mean = |f: fn(&SolverRow) -> f64| -> Vec<f64> {
            by_outliers
                .values()
                .map(|rows| rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64)
                .collect()
        };
        for (metric, ys) in [
            ("oracle_calls", mean(|r| r.oracle_calls as f64)),
            ("wall_secs", mean(|r| r.wall_secs)),
        ] {
            if let Ok(fit) = affine_fit(&xs, &ys) {
                out.push(TrendRow {
                    experiment: experiment.clone(),
                    method: method.clone(),
                    metric: metric.to_string(),
                    points: xs.len(),
                    slope: fit.slope,
                    intercept: fit.intercept,
                    r2: fit.r2,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles_interpolate() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(percentile(&v, 0.5), 3.0);
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 1.0), 5.0);
        assert!((percentile(&v, 0.05) - 1.2).abs() < 1e-12);
        assert_eq!(percentile(&[7.0], 0.95), 7.0);
    }

    #[test]
    fn affine_fit_recovers_lines() {
        let xs = [5.0, 10.0, 15.0, 20.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x + 2.0).collect();
        let fit = affine_fit(&xs, &ys).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12 && (fit.intercept - 2.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!(affine_fit(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        let noisy = affine_fit(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(noisy.r2 < 0.5);
    }
}
