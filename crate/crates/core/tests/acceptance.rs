//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::Value;

use common::{eps, small_dataset, small_spec};
use maxcon::bench::{self, ExperimentKind, ExperimentSpec, SolverRow, Tables};
use maxcon::boolean::{
    corollary1_gap, ideal_mbf, influence_exact, influence_exact_rational, influence_sampled,
    is_upper_zero, max_upper_zero_exhaustive, theorem1_influence, theorem2_influence, IdealSpec, SamplingOptions,
    TruthTable,
};
use maxcon::feasibility::FeasibilityOracle;
use maxcon::maxcon::{local_expansion, mbf_maxcon, MaxConConfig, MaxConResult, Variant};
use maxcon::model::{generate_line2d, generate_linear, Corruption, Dataset};
use maxcon::{seed, SubsetMask};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

/// Upper-zero checks collected from every solver run of the other criteria.
#[derive(Default)]
struct Certificates {
    checked: usize,
    violations: usize,
}

impl Certificates {
    fn record(&mut self, ok: bool) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
        }
    }

    fn record_result(&mut self, data: &Dataset, res: &MaxConResult) {
        if !res.method.ends_with("/nL") {
            let oracle = FeasibilityOracle::new(data, eps(0.1));
            self.record(is_upper_zero(&oracle, &res.mask));
        }
    }
}

/// Every disjoint ideal spec with `n ≤ 14`, `p ∈ {1, 2, 3}` and one or two
/// structures, up to relabelling. Structures are laid out on a seeded
/// permutation of the points rather than contiguously.
fn ideal_sweep() -> Vec<IdealSpec> {
    let mut specs = Vec::new();
    let mut rng = seed::rng(1);
    for n in 2..=14usize {
        for p in 1..=3usize {
            let mut shapes: Vec<Vec<usize>> = (p + 1..=n).map(|k| vec![k]).collect();
            for k1 in p + 1..=n {
                for k2 in k1..=n.saturating_sub(k1) {
                    shapes.push(vec![k1, k2]);
                }
            }
            for shape in shapes {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut rng);
                let mut start = 0;
                let structures = shape
                    .iter()
                    .map(|&k| {
                        let s = order[start..start + k].to_vec();
                        start += k;
                        s
                    })
                    .collect();
                specs.push(IdealSpec::new(n, p, structures).expect("valid sweep spec"));
            }
        }
    }
    specs
}

fn exact_rational(spec: &IdealSpec) -> Vec<BigRational> {
    let table = TruthTable::tabulate(&ideal_mbf(spec)).expect("n ≤ 14 tabulates");
    influence_exact_rational(&table).expect("exact influences")
}

fn criterion_1() -> Outcome {
    let specs = ideal_sweep();
    let mut cases = 0usize;
    let mut mismatches = 0usize;
    for spec in &specs {
        let exact = exact_rational(spec);
        for (i, value) in exact.iter().enumerate() {
            let class = spec.membership(i);
            cases += 1;
            if theorem2_influence(spec, &class)? != *value {
                mismatches += 1;
            }
            if let [k] = spec.levels()[..] {
                cases += 1;
                if theorem1_influence(spec.n(), spec.p(), k, class[0])? != *value {
                    mismatches += 1;
                }
            }
        }
    }
    Ok((mismatches == 0, format!("{} specs, {cases} coordinate checks, {mismatches} mismatches", specs.len())))
}

fn criterion_2() -> Outcome {
    let mut gaps = 0usize;
    let mut gap_errors = 0usize;
    for n in 2..=14usize {
        for p in 1..=3usize {
            for k in p + 1..n {
                gaps += 1;
                let two_branch = theorem1_influence(n, p, k, false)? - theorem1_influence(n, p, k, true)?;
                if corollary1_gap(n, p, k)? != two_branch {
                    gap_errors += 1;
                }
            }
        }
    }
    let mut pairs = 0usize;
    let mut order_errors = 0usize;
    for spec in ideal_sweep() {
        let exact = exact_rational(&spec);
        let classes: Vec<Vec<bool>> =
            spec.classes().into_iter().filter(|c| !spec.class_members(c).is_empty()).collect();
        for a in &classes {
            for b in &classes {
                let dominates = a != b && a.iter().zip(b).all(|(&x, &y)| x >= y);
                if !dominates {
                    continue;
                }
                pairs += 1;
                let (ia, ib) = (theorem2_influence(&spec, a)?, theorem2_influence(&spec, b)?);
                let (ea, eb) = (&exact[spec.class_members(a)[0]], &exact[spec.class_members(b)[0]]);
                if ia >= ib || ea >= eb {
                    order_errors += 1;
                }
            }
        }
    }
    Ok((
        gap_errors == 0 && order_errors == 0,
        format!("{gaps} gap identities ({gap_errors} wrong), {pairs} ordered class pairs ({order_errors} violations)"),
    ))
}

fn monotonicity_datasets() -> Vec<Dataset> {
    (0..50u64)
        .map(|s| {
            let synth = if s % 2 == 0 {
                generate_line2d(20, 0.25, Corruption::default(), s)
            } else {
                generate_linear(20, 3, 5, Corruption::default(), s)
            };
            synth.expect("generated").dataset
        })
        .collect()
}

fn criterion_3() -> Outcome {
    let mut violations = 0usize;
    let mut informative = 0usize;
    let datasets = monotonicity_datasets();
    for (d, data) in datasets.iter().enumerate() {
        let n = data.n();
        let oracle = FeasibilityOracle::new(data, eps(0.1));
        let mut rng = seed::stream_rng(3, d as u64);
        for _ in 0..10_000 {
            let r: f64 = rng.random_range(0.05..0.6);
            let mut alpha = SubsetMask::empty(n);
            for i in 0..n {
                if rng.random_bool(r) {
                    alpha.set(i);
                }
            }
            let mut beta = alpha.clone();
            let zeros: Vec<usize> = alpha.zeros().collect();
            if zeros.is_empty() {
                alpha.clear(rng.random_range(0..n));
            } else {
                beta.set(zeros[rng.random_range(0..zeros.len())]);
                let extra: f64 = rng.random_range(0.0..0.5);
                for &i in &zeros {
                    if rng.random_bool(extra) {
                        beta.set(i);
                    }
                }
            }
            let (fa, fb) = (oracle.is_feasible(&alpha), oracle.is_feasible(&beta));
            if fb && !fa {
                violations += 1;
            }
            if fa && !fb {
                informative += 1;
            }
        }
    }
    Ok((
        violations == 0,
        format!("{} datasets x 10000 pairs, {violations} violations ({informative} pairs cross the boundary)", datasets.len()),
    ))
}

fn criterion_4() -> Outcome {
    let synth = generate_line2d(15, 0.25, Corruption::default(), 0)?;
    let oracle = FeasibilityOracle::new(&synth.dataset, eps(0.1));
    let table = TruthTable::tabulate_monotone(&oracle)?;
    let exact = influence_exact(&table)?;
    let all: Vec<usize> = (0..15).collect();
    let runs: Vec<Vec<f64>> = (0..200u64)
        .map(|s| {
            let est = influence_sampled(&table, &SubsetMask::full(15), &all, SamplingOptions::new(1000, 0.5, s))?;
            Ok(all.iter().map(|&i| est.get(i).expect("every point targeted")).collect())
        })
        .collect::<maxcon::Result<_>>()?;
    let mut within = 0usize;
    for &i in &all {
        let xs: Vec<f64> = runs.iter().map(|r| r[i]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        let se = (var / xs.len() as f64).sqrt();
        let truth = exact.get(i).expect("exact is total");
        if (mean - truth).abs() <= 3.0 * se || (se == 0.0 && mean == truth) {
            within += 1;
        }
    }
    let unbiased = within as f64 >= 0.95 * all.len() as f64;

    let mut spec = ExperimentSpec::new(ExperimentKind::InfluenceError, (0..100).collect());
    spec.grid.m = vec![100, 10_000];
    spec.grid.q = vec![0.5];
    let rows = bench::run_influence_error(&spec)?;
    let mut by_seed: BTreeMap<u64, BTreeMap<usize, f64>> = BTreeMap::new();
    for r in &rows {
        by_seed.entry(r.seed).or_default().insert(r.m, r.mse);
    }
    let improved = by_seed.values().filter(|by_m| by_m[&10_000] < by_m[&100]).count();

    // Same estimator on the raw oracle for a spot check of the table shortcut.
    let direct = influence_sampled(&oracle, &SubsetMask::full(15), &all, SamplingOptions::new(100, 0.5, 0))?;
    let tabled = influence_sampled(&table, &SubsetMask::full(15), &all, SamplingOptions::new(100, 0.5, 0))?;
    let consistent = direct == tabled;

    Ok((
        unbiased && improved == by_seed.len() && consistent,
        format!(
            "{within}/15 point means within 3 SE; MSE(m=10000) < MSE(m=100) in {improved}/{} seeds; oracle and table estimates agree: {consistent}",
            by_seed.len()
        ),
    ))
}

fn criterion_5() -> Outcome {
    let mut spec = ExperimentSpec::new(ExperimentKind::Separation, (0..100).collect());
    spec.grid.m = vec![100, 1000, 10_000];
    spec.grid.q = vec![0.1, 0.5];
    let rows = bench::run_separation(&spec)?;
    let median = |m: usize, q: f64| {
        let xs: Vec<f64> = rows.iter().filter(|r| r.m == m && r.q == q).map(|r| r.separation).collect();
        bench::percentile(&xs, 0.5)
    };
    let small_q_wins = median(1000, 0.1) > median(1000, 0.5);
    let (a, b, c) = (median(100, 0.1), median(1000, 0.1), median(10_000, 0.1));
    let increasing = a < b && b < c;
    Ok((
        small_q_wins && increasing,
        format!(
            "m=1000: median q=0.1 {:.4} vs q=0.5 {:.4} ({}); q=0.1 medians over m=100/1000/10000: {a:.4} / {b:.4} / {c:.4} ({})",
            median(1000, 0.1),
            median(1000, 0.5),
            if small_q_wins { "ok" } else { "not larger" },
            if increasing { "increasing" } else { "not increasing" }
        ),
    ))
}

fn criterion_6(certs: &mut Certificates) -> Outcome {
    let data = small_dataset();
    let oracle = FeasibilityOracle::new(&data, eps(0.1));
    let from_data = max_upper_zero_exhaustive(&oracle)?.to_string();
    let from_ideal = max_upper_zero_exhaustive(&ideal_mbf(&small_spec()))?.to_string();
    let mut hits = 0usize;
    for s in 0..100u64 {
        let res = mbf_maxcon(&data, &MaxConConfig::new(eps(0.1), s).with_m(2000))?;
        certs.record_result(&data, &res);
        if res.consensus_size() == 4 {
            hits += 1;
        }
    }
    Ok((
        from_data == "11110" && from_ideal == "11110" && hits >= 95,
        format!("exhaustive: dataset {from_data}, ideal {from_ideal}; popcount 4 in {hits}/100 seeds"),
    ))
}

fn criterion_7(certs: &mut Certificates) -> Outcome {
    let mut near = 0usize;
    let mut above = 0usize;
    let mut exact = 0usize;
    for s in 0..100u64 {
        let synth = generate_line2d(15, 0.25, Corruption::default(), s)?;
        let data = &synth.dataset;
        let best = max_upper_zero_exhaustive(&FeasibilityOracle::new(data, eps(0.1)))?.count();
        let res = mbf_maxcon(data, &MaxConConfig::new(eps(0.1), s))?;
        certs.record_result(data, &res);
        let got = res.consensus_size();
        if got > best {
            above += 1;
        }
        if got + 1 >= best && got <= best {
            near += 1;
        }
        if got == best {
            exact += 1;
        }
    }
    Ok((
        near >= 90 && above == 0,
        format!("within 1 of optimum in {near}/100 (optimal in {exact}), above optimum {above}"),
    ))
}

fn certify_rows(certs: &mut Certificates, rows: &[SolverRow]) {
    for r in rows.iter().filter(|r| r.expanded) {
        certs.record(r.upper_zero);
    }
}

fn criterion_8(certs: &mut Certificates) -> Outcome {
    let spec = ExperimentSpec::new(ExperimentKind::Ablation, (0..100).collect());
    let rows = bench::run_ablation(&spec)?;
    certify_rows(certs, &rows);
    let mean_deficit = |v: Variant| {
        let name = format!("mbf-maxcon/{}", v.name());
        let xs: Vec<f64> = rows.iter().filter(|r| r.method == name).map(|r| r.deficit as f64).collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    let calls: BTreeMap<(u64, String), u64> =
        rows.iter().map(|r| ((r.seed, r.method.clone()), r.oracle_calls)).collect();
    let nb_ge_full = spec
        .grid
        .seeds
        .iter()
        .filter(|&&s| calls[&(s, "mbf-maxcon/nB".to_string())] >= calls[&(s, "mbf-maxcon/full".to_string())])
        .count();
    let (full, nl, nr, nb) = (
        mean_deficit(Variant::Full),
        mean_deficit(Variant::NoLocalExpansion),
        mean_deficit(Variant::NoReestimation),
        mean_deficit(Variant::NoBasis),
    );
    Ok((
        full <= nl && full <= nr && nb_ge_full == spec.grid.seeds.len(),
        format!(
            "mean deficit full {full:.2}, nL {nl:.2}, nR {nr:.2}, nB {nb:.2}; nB calls >= full calls in {nb_ge_full}/{} runs",
            spec.grid.seeds.len()
        ),
    ))
}

fn criterion_9(certs: &mut Certificates) -> Outcome {
    let mut spec = ExperimentSpec::new(ExperimentKind::Ablation, vec![0, 1, 2]);
    spec.instance.n = Some(200);
    spec.grid.outliers = (1..=8).map(|k| 5 * k).collect();
    spec.grid.variants = vec![Variant::Full];
    let rows = bench::run_ablation(&spec)?;
    certify_rows(certs, &rows);
    let tables = Tables {
        influence: Vec::new(),
        solver: rows,
    };
    let trend = bench::trends(&tables)
        .into_iter()
        .find(|t| t.metric == "oracle_calls")
        .ok_or("no oracle-call trend")?;
    Ok((
        trend.r2 >= 0.9,
        format!(
            "n=200, n_o=5..40, {} seeds: calls ~ {:.0} * n_o + {:.0}, R^2 {:.4}",
            spec.grid.seeds.len(),
            trend.slope,
            trend.intercept,
            trend.r2
        ),
    ))
}

fn criterion_10(certs: &mut Certificates) -> Outcome {
    // Direct expansions from random feasible starting sets.
    for (d, data) in monotonicity_datasets().iter().enumerate() {
        let oracle = FeasibilityOracle::new(data, eps(0.1));
        let mut rng = seed::stream_rng(10, d as u64);
        for _ in 0..20 {
            let mut start = SubsetMask::empty(data.n());
            for _ in 0..rng.random_range(0..=data.p() + 1) {
                start.set(rng.random_range(0..data.n()));
            }
            if !oracle.is_feasible(&start) {
                continue;
            }
            let out = local_expansion(data, eps(0.1), &start)?;
            certs.record(start.is_subset_of(&out) && is_upper_zero(&oracle, &out));
        }
    }
    Ok((certs.violations == 0, format!("{} expansion outputs checked, {} violations", certs.checked, certs.violations)))
}

/// Removes timing fields so the remaining bytes can be compared.
fn strip_json_timing(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.retain(|k, _| !k.ends_with("_secs"));
            map.values_mut().for_each(strip_json_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_json_timing),
        _ => {}
    }
}

/// Drops `wall_secs` columns and `wall_secs` aggregate rows from a CSV.
fn strip_csv_timing(bytes: &[u8]) -> Vec<Vec<String>> {
    let mut reader = csv::Reader::from_reader(bytes);
    let header: Vec<String> = reader.headers().expect("csv header").iter().map(String::from).collect();
    let keep: Vec<usize> = (0..header.len()).filter(|&j| !header[j].ends_with("_secs")).collect();
    let metric = header.iter().position(|h| h == "metric");
    let mut out = vec![keep.iter().map(|&j| header[j].clone()).collect()];
    for rec in reader.records() {
        let rec = rec.expect("csv record");
        if metric.is_some_and(|j| rec[j].ends_with("_secs")) {
            continue;
        }
        out.push(keep.iter().map(|&j| rec[j].to_string()).collect());
    }
    out
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_maxcon"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir()?;
    let path = |name: &str| dir.path().join(name).to_str().expect("utf-8 temp path").to_string();
    let read = |p: &str| std::fs::read(Path::new(p));
    let mut checks = Vec::new();

    let data = path("data.csv");
    run_cli(&["generate", "linear", "--n", "18", "--p", "3", "--outliers", "4", "--seed", "11", "--out", &data])?;
    let first = read(&data)?;
    run_cli(&["generate", "linear", "--n", "18", "--p", "3", "--outliers", "4", "--seed", "11", "--out", &data])?;
    checks.push(("generate", read(&data)? == first));

    // fit without a seed, then replay from the recorded config.
    let fit_out = path("fit.json");
    run_cli(&["fit", "--data", &data, "--eps", "0.1", "--m", "300", "--out", &fit_out])?;
    let mut recorded: Value = serde_json::from_slice(&read(&fit_out)?)?;
    let cfg = path("fit.cfg.json");
    std::fs::write(&cfg, serde_json::to_vec(&recorded["config"])?)?;
    let mut replay: Value = serde_json::from_slice(&run_cli(&["fit", "--data", &data, "--config", &cfg])?)?;
    strip_json_timing(&mut recorded);
    strip_json_timing(&mut replay);
    checks.push(("fit", recorded == replay));

    let nl_args = ["fit", "--data", &data, "--eps", "0.1", "--m", "200", "--seed", "5", "--variant", "nL"];
    let mut a: Value = serde_json::from_slice(&run_cli(&nl_args)?)?;
    let mut b: Value = serde_json::from_slice(&run_cli(&nl_args)?)?;
    strip_json_timing(&mut a);
    strip_json_timing(&mut b);
    checks.push(("fit --variant nL", a == b));

    let inf_args = ["influence", "--data", &data, "--eps", "0.1", "--m", "500", "--q", "0.3", "--seed", "8"];
    checks.push(("influence", run_cli(&inf_args)? == run_cli(&inf_args)?));

    let inf_spec = path("sep.json");
    std::fs::write(&inf_spec, r#"{"kind": "separation", "grid": {"seeds": [1, 2], "m": [100], "q": [0.2, 0.5]}}"#)?;
    let abl_spec = path("abl.json");
    std::fs::write(
        &abl_spec,
        r#"{"kind": "ablation", "grid": {"seeds": [1, 2], "outliers": [2]}, "instance": {"n": 12, "p": 2}, "solver": {"m": 200}}"#,
    )?;
    let cmp_spec = path("cmp.json");
    std::fs::write(
        &cmp_spec,
        r#"{"kind": "comparison", "grid": {"seeds": [3]}, "instance": {"n": 14, "p": 2}, "solver": {"m": 200}}"#,
    )?;
    let (out1, out2) = (path("run1"), path("run2"));
    for out in [&out1, &out2] {
        for spec in [&inf_spec, &abl_spec, &cmp_spec] {
            run_cli(&["experiment", "--spec", spec, "--out-dir", out])?;
        }
    }
    for table in ["separation.csv", "ablation.csv", "comparison.csv"] {
        let (x, y) = (read(&format!("{out1}/{table}"))?, read(&format!("{out2}/{table}"))?);
        let same = if table == "separation.csv" { x == y } else { strip_csv_timing(&x) == strip_csv_timing(&y) };
        checks.push((table, same));
    }
    let r1 = strip_csv_timing(&run_cli(&["report", "--in", &out1])?);
    let r2 = strip_csv_timing(&run_cli(&["report", "--in", &out2])?);
    checks.push(("report", r1 == r2));

    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(name, _)| *name).collect();
    Ok((
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} commands reproduced byte-identical non-timing output", checks.len())
        } else {
            format!("differing output: {}", failed.join(", "))
        },
    ))
}

fn main() {
    let mut certs = Certificates::default();
    let mut failures = 0;
    let mut report = |id: usize, name: &str, outcome: Outcome, started: Instant| {
        let secs = started.elapsed().as_secs_f64();
        let (ok, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        if !ok {
            failures += 1;
        }
        println!("criterion {id:>2} {name:<24} {} [{secs:.1}s] {detail}", if ok { "PASS" } else { "FAIL" });
    };

    let t = Instant::now();
    report(1, "theorem equivalence", criterion_1(), t);
    let t = Instant::now();
    report(2, "corollaries", criterion_2(), t);
    let t = Instant::now();
    report(3, "monotonicity", criterion_3(), t);
    let t = Instant::now();
    report(4, "influence estimator", criterion_4(), t);
    let t = Instant::now();
    report(5, "separation trends", criterion_5(), t);
    let t = Instant::now();
    report(6, "small-scale exactness", criterion_6(&mut certs), t);
    let t = Instant::now();
    report(7, "near-optimality", criterion_7(&mut certs), t);
    let t = Instant::now();
    report(8, "ablation ordering", criterion_8(&mut certs), t);
    let t = Instant::now();
    report(9, "cost scaling", criterion_9(&mut certs), t);
    let t = Instant::now();
    report(10, "upper-zero certification", criterion_10(&mut certs), t);
    let t = Instant::now();
    report(11, "cli determinism", criterion_11(), t);

    println!("{} of 11 criteria passed", 11 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
