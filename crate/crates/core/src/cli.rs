//! Command-line front end.
//!
//! Every command computes all of its outputs in memory first and only then
//! writes them (each through a temporary file that is renamed into place),
//! so a failing run leaves no partial files behind.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::domain_tests::{scan, select_k_opt, DomainTestResult, Side, TestKind, DEFAULT_K_MIN};
use crate::endpoint::{fan, max_estimate, mominv, mominv_estimate, rb_corrected, weibull_upper_bound, Method};
use crate::error::{EvtError, Result};
use crate::gpd_ml::{fit_gpd, fit_gpd_trend, lr_trend_test, potml_endpoint};
use crate::models_mc::{run_mc, McConfig, McReport, ModelSpec};
use crate::sample::SortedSample;
use crate::tail_prob::{exceed_prob_mominv, exceed_prob_potml};

#[derive(Debug, Parser)]
#[command(name = "evt-endpoint", version, about = "Right-endpoint estimation for light-tailed data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Endpoint estimates over k and at a chosen k.
    Estimate(EstimateArgs),
    /// Domain-of-attraction test statistics over k and the k-selection rule.
    TestDomain(TestDomainArgs),
    /// Probability of exceeding a level, over k.
    TailProb(TailProbArgs),
    /// Likelihood-ratio test for a log-linear trend in the GPD scale.
    TrendTest(TrendArgs),
    /// Monte Carlo comparison of estimators on a parent model.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Column holding the observations.
    #[arg(long)]
    pub column: String,
    /// Observations are divided by this (365.25 turns days into years).
    #[arg(long, default_value_t = 365.25)]
    pub unit_divisor: f64,
    #[arg(long, default_value = "out")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct KRange {
    #[arg(long, default_value_t = DEFAULT_K_MIN)]
    pub k_min: usize,
    /// Largest k scanned (default: largest admissible).
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub range: KRange,
    /// Tuning parameter for the point estimates (default: selected by the domain tests).
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated estimators, or `all`.
    #[arg(long, default_value = "all")]
    pub method: String,
}

#[derive(Debug, Args)]
pub struct TestDomainArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub range: KRange,
}

#[derive(Debug, Args)]
pub struct TailProbArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub range: KRange,
    /// Level whose exceedance probability is estimated.
    #[arg(long)]
    pub x: f64,
}

#[derive(Debug, Args)]
pub struct TrendArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Column holding the time covariate; fitted as time since the earliest value.
    #[arg(long)]
    pub time_column: String,
    /// Thresholds, in the units after division.
    #[arg(long, value_delimiter = ',', required = true)]
    pub threshold: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Parent model: 1, 2, 3 or 4.
    #[arg(long)]
    pub model: u8,
    #[arg(long)]
    pub tau1: Option<f64>,
    #[arg(long)]
    pub tau2: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 300)]
    pub replicates: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Comma-separated estimators.
    #[arg(long, default_value = "MAX,FAN,MOMINV,POTML")]
    pub estimators: String,
    /// Comma-separated domain tests averaged over replicates; empty for none.
    #[arg(long, default_value = "GSTAR,RATIO,GREENWOOD")]
    pub tests: String,
    #[arg(long, default_value_t = 10)]
    pub potml_stride: usize,
    /// Worker threads (0 = all cores); overrides EVT_THREADS.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = "out")]
    pub output_dir: PathBuf,
}

/// Parsed input: values after unit conversion, in file order, plus optional times.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub sample: SortedSample,
    pub values: Vec<f64>,
    pub times: Option<Vec<f64>>,
}

fn parse_cell(raw: Option<&str>, row: usize, name: &str) -> Result<f64> {
    let cell = raw.map(str::trim).unwrap_or("");
    if cell.is_empty() {
        return Err(EvtError::Input(format!("row {row}: missing value in column '{name}'")));
    }
    let v: f64 = cell
        .parse()
        .map_err(|_| EvtError::Input(format!("row {row}: '{cell}' in column '{name}' is not a number")))?;
    if !v.is_finite() {
        return Err(EvtError::Input(format!("row {row}: non-finite value in column '{name}'")));
    }
    Ok(v)
}

/// Read one numeric column (and optionally a time column) from a CSV file.
pub fn ingest_csv(path: &Path, column: &str, time_column: Option<&str>, unit_divisor: f64) -> Result<Ingested> {
    if !(unit_divisor > 0.0 && unit_divisor.is_finite()) {
        return Err(EvtError::Input(format!("unit divisor must be positive, got {unit_divisor}")));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| EvtError::Input(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| EvtError::Input(format!("{}: {e}", path.display())))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| EvtError::Input(format!("column '{name}' not found in {}", path.display())))
    };
    let col = find(column)?;
    let tcol = time_column.map(find).transpose()?;

    let mut values = Vec::new();
    let mut times = tcol.map(|_| Vec::new());
    for (i, rec) in reader.records().enumerate() {
        // Header is line 1.
        let row = i + 2;
        let rec = rec.map_err(|e| EvtError::Input(format!("row {row}: {e}")))?;
        values.push(parse_cell(rec.get(col), row, column)? / unit_divisor);
        if let (Some(tc), Some(ts)) = (tcol, times.as_mut()) {
            ts.push(parse_cell(rec.get(tc), row, time_column.unwrap_or_default())?);
        }
    }
    if values.is_empty() {
        return Err(EvtError::Input(format!("{} has no data rows", path.display())));
    }
    let sample = SortedSample::from_values(&values)?;
    Ok(Ingested { sample, values, times })
}

/// Files produced by a command, written only once everything succeeded.
#[derive(Default)]
struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn csv<R: Serialize>(&mut self, name: &str, header: &[&str], rows: &[R]) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        let err = |e: csv::Error| EvtError::Input(format!("cannot encode {name}: {e}"));
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.serialize(r).map_err(err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| EvtError::Input(format!("cannot encode {name}: {e}")))?;
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| EvtError::Input(format!("cannot encode {name}: {e}")))?;
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    fn write_to(self, dir: &Path) -> Result<()> {
        let io = |e: std::io::Error| EvtError::Input(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        for (name, bytes) in self.files {
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
            tmp.write_all(&bytes).map_err(io)?;
            tmp.persist(dir.join(&name)).map_err(|e| io(e.error))?;
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(EvtError::Domain { what: "alpha", value: alpha })
    }
}

#[derive(Debug, Serialize)]
struct EstimateRow<'a> {
    k_star: usize,
    estimator: &'a str,
    value: f64,
}

#[derive(Debug, Serialize)]
struct TestRow {
    k: usize,
    test: &'static str,
    raw: f64,
    normalized: f64,
    p_heavy: f64,
    p_short: f64,
}

/// Outcome of the k-selection rule: first Greenwood short-tail rejection,
/// first two-sided T1 rejection, and their maximum.
#[derive(Debug, Clone, Serialize)]
pub struct KSelection {
    pub k0_g: Option<usize>,
    pub k0_np: Option<usize>,
    pub k_opt: Option<usize>,
    #[serde(skip)]
    pub series: Vec<(TestKind, Vec<DomainTestResult>)>,
}

/// Scan all four tests over `k_min..=k_max` and apply the k-selection rule.
pub fn select_k(s: &SortedSample, alpha: f64, k_min: usize, k_max: usize) -> Result<KSelection> {
    check_alpha(alpha)?;
    let series: Vec<(TestKind, Vec<DomainTestResult>)> = TestKind::ALL
        .iter()
        .map(|&t| (t, scan(s, t, k_min.max(1)..=k_max)))
        .collect();
    let get = |t: TestKind| series.iter().find(|(k, _)| *k == t).map(|(_, v)| v.as_slice()).unwrap_or(&[]);
    let first = |t: TestKind, side: Side| -> Result<Option<usize>> {
        let v = get(t);
        if v.is_empty() {
            return Ok(None);
        }
        select_k_opt(&[(v, side)], alpha, k_min)
    };
    let k0_g = first(TestKind::Greenwood, Side::Short)?;
    let k0_np = first(TestKind::T1, Side::TwoSided)?;
    let k_opt = match (k0_g, k0_np) {
        (Some(a), Some(b)) => Some(a.max(b)),
        _ => None,
    };
    Ok(KSelection { k0_g, k0_np, k_opt, series })
}

fn default_k_max(n: usize) -> usize {
    n.saturating_sub(1) / 2
}

fn parse_tests(spec: &str) -> Result<Vec<TestKind>> {
    let mut out: Vec<TestKind> = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let t: TestKind = part.parse()?;
        if !out.contains(&t) {
            out.push(t);
        }
    }
    Ok(out)
}

fn parse_methods(spec: &str) -> Result<Vec<Method>> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(vec![Method::Max, Method::Fan, Method::MomInv, Method::Rb1, Method::Rb2, Method::PotMl]);
    }
    let mut out: Vec<Method> = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let m: Method = part.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(EvtError::Input("no estimator given".into()));
    }
    Ok(out)
}

fn point_estimate(s: &SortedSample, m: Method, k: usize) -> Result<f64> {
    Ok(match m {
        Method::Max => max_estimate(s).estimate,
        Method::Fan => fan(s, k)?.estimate,
        Method::MomInv => mominv_estimate(s, k)?.estimate,
        Method::Rb1 => rb_corrected(s, k, 1)?.estimate,
        Method::Rb2 => rb_corrected(s, k, 2)?.estimate,
        Method::PotMl => potml_endpoint(s, k)?.estimate,
    })
}

#[derive(Debug, Serialize)]
struct PointSummary {
    estimator: String,
    k: usize,
    k_star: usize,
    estimate: Option<f64>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct EstimateSummary<'a> {
    command: &'static str,
    input: String,
    column: &'a str,
    unit_divisor: f64,
    n: usize,
    max: f64,
    alpha: f64,
    k_selection: Option<KSelection>,
    k: usize,
    gamma_hat: Option<f64>,
    a_hat: Option<f64>,
    upper_bound: Option<f64>,
    estimates: Vec<PointSummary>,
}

fn estimate_cmd(a: &EstimateArgs) -> Result<(Outputs, String)> {
    check_alpha(a.range.alpha)?;
    let data = ingest_csv(&a.input.input, &a.input.column, None, a.input.unit_divisor)?;
    let s = &data.sample;
    let n = s.len();
    let methods = parse_methods(&a.method)?;
    let k_max = a.range.k_max.unwrap_or_else(|| default_k_max(n)).min(default_k_max(n));

    let (k, selection) = match a.k {
        Some(k) => (k, None),
        None => {
            let sel = select_k(s, a.range.alpha, a.range.k_min, k_max)?;
            let k = sel.k_opt.ok_or_else(|| {
                EvtError::Degenerate("the domain tests never reject; pass --k explicitly".into())
            })?;
            (k, Some(sel))
        }
    };
    if k < 2 || 2 * k > n {
        return Err(EvtError::Input(format!("k={k} outside [2, n/2] for n={n}")));
    }

    let mut rows = Vec::new();
    for &m in &methods {
        for kk in 2..=k_max {
            if let Ok(v) = point_estimate(s, m, kk) {
                rows.push(EstimateRow { k_star: m.k_star(kk), estimator: m.label(), value: v });
            }
            if m == Method::Max {
                break;
            }
        }
    }
    for kk in 2..=k_max {
        if let Ok(v) = weibull_upper_bound(s, kk, a.range.alpha) {
            rows.push(EstimateRow { k_star: 2 * kk, estimator: "UPPER_BOUND", value: v });
        }
    }

    let estimates: Vec<PointSummary> = methods
        .iter()
        .map(|&m| {
            let r = point_estimate(s, m, k);
            PointSummary {
                estimator: m.label().to_string(),
                k,
                k_star: m.k_star(k),
                estimate: r.as_ref().ok().copied(),
                error: r.err().map(|e| e.to_string()),
            }
        })
        .collect();
    let fit = mominv(s, k).ok();
    let upper_bound = weibull_upper_bound(s, k, a.range.alpha).ok();

    let mut text = format!("n = {n}, k = {k}\n");
    if let Some(f) = &fit {
        text += &format!("gamma_hat = {:.6}, a_hat = {:.6}\n", f.gamma_hat, f.a_hat);
    }
    for e in &estimates {
        match (e.estimate, &e.error) {
            (Some(v), _) => text += &format!("{:<12} {v:.4}\n", e.estimator),
            (None, Some(err)) => text += &format!("{:<12} unavailable ({err})\n", e.estimator),
            _ => {}
        }
    }
    if let Some(ub) = upper_bound {
        text += &format!("{:<12} {ub:.4}\n", "UPPER_BOUND");
    }

    let summary = EstimateSummary {
        command: "estimate",
        input: a.input.input.display().to_string(),
        column: &a.input.column,
        unit_divisor: a.input.unit_divisor,
        n,
        max: s.max(),
        alpha: a.range.alpha,
        k_selection: selection,
        k,
        gamma_hat: fit.map(|f| f.gamma_hat),
        a_hat: fit.map(|f| f.a_hat),
        upper_bound,
        estimates,
    };
    let mut out = Outputs::default();
    out.csv("estimates.csv", &["k_star", "estimator", "value"], &rows)?;
    out.json("summary.json", &summary)?;
    Ok((out, text))
}

fn test_domain_cmd(a: &TestDomainArgs) -> Result<(Outputs, String)> {
    check_alpha(a.range.alpha)?;
    let data = ingest_csv(&a.input.input, &a.input.column, None, a.input.unit_divisor)?;
    let s = &data.sample;
    let k_max = a.range.k_max.unwrap_or_else(|| s.len().saturating_sub(1));
    let sel = select_k(s, a.range.alpha, a.range.k_min, k_max)?;
    let rows: Vec<TestRow> = sel
        .series
        .iter()
        .flat_map(|(_, v)| v.iter())
        .map(|r| TestRow {
            k: r.k,
            test: r.test.label(),
            raw: r.raw,
            normalized: r.normalized,
            p_heavy: r.p_heavy,
            p_short: r.p_short,
        })
        .collect();
    let fmt = |k: Option<usize>| k.map_or("none".to_string(), |k| k.to_string());
    let text = format!(
        "k0_G = {}, k0_NP = {}, k_opt = {}\n",
        fmt(sel.k0_g),
        fmt(sel.k0_np),
        fmt(sel.k_opt)
    );
    let summary = serde_json::json!({
        "command": "test-domain",
        "input": a.input.input.display().to_string(),
        "column": a.input.column,
        "unit_divisor": a.input.unit_divisor,
        "n": s.len(),
        "alpha": a.range.alpha,
        "k_min": a.range.k_min,
        "k_max": k_max,
        "k_selection": sel,
    });
    let mut out = Outputs::default();
    out.csv("tests.csv", &["k", "test", "raw", "normalized", "p_heavy", "p_short"], &rows)?;
    out.json("summary.json", &summary)?;
    Ok((out, text))
}

#[derive(Debug, Serialize)]
struct TailRow {
    k: usize,
    method: &'static str,
    x: f64,
    p_hat: f64,
}

fn tail_prob_cmd(a: &TailProbArgs) -> Result<(Outputs, String)> {
    let data = ingest_csv(&a.input.input, &a.input.column, None, a.input.unit_divisor)?;
    let s = &data.sample;
    let k_max = a.range.k_max.unwrap_or_else(|| s.len().saturating_sub(1));
    let mut rows = Vec::new();
    for k in a.range.k_min.max(2)..=k_max.min(s.len().saturating_sub(1)) {
        if let Ok(p) = exceed_prob_mominv(s, k, a.x) {
            rows.push(TailRow { k, method: "MOMINV", x: a.x, p_hat: p.p_hat });
        }
        if let Ok(p) = exceed_prob_potml(s, k, a.x) {
            rows.push(TailRow { k, method: "POTML", x: a.x, p_hat: p.p_hat });
        }
    }
    if rows.is_empty() {
        return Err(EvtError::Degenerate("no k in range gave a tail probability".into()));
    }
    let max_p = rows.iter().map(|r| r.p_hat).fold(0.0, f64::max);
    let text = format!("{} estimates of P(X > {}); largest {max_p:.3e}\n", rows.len(), a.x);
    let summary = serde_json::json!({
        "command": "tail-prob",
        "input": a.input.input.display().to_string(),
        "column": a.input.column,
        "unit_divisor": a.input.unit_divisor,
        "n": s.len(),
        "x": a.x,
        "max_p_hat": max_p,
    });
    let mut out = Outputs::default();
    out.csv("tail_prob.csv", &["k", "method", "x", "p_hat"], &rows)?;
    out.json("summary.json", &summary)?;
    Ok((out, text))
}

#[derive(Debug, Serialize)]
struct TrendRow {
    threshold: f64,
    n_exc: usize,
    loglik0: f64,
    gamma0: f64,
    sigma0: f64,
    endpoint0: Option<f64>,
    loglik1: f64,
    beta0: f64,
    beta1: f64,
    gamma1: f64,
    deviance: f64,
    p_value: f64,
}

fn trend_cmd(a: &TrendArgs) -> Result<(Outputs, String)> {
    let data = ingest_csv(&a.input.input, &a.input.column, Some(&a.time_column), a.input.unit_divisor)?;
    let times = data.times.as_deref().unwrap_or_default();
    let t_first = times.iter().copied().fold(f64::INFINITY, f64::min);
    let mut rows = Vec::new();
    let mut text = String::new();
    for &u in &a.threshold {
        let obs: Vec<(f64, f64)> = data
            .values
            .iter()
            .zip(times)
            .filter(|(x, _)| **x > u)
            .map(|(x, t)| (x - u, t - t_first))
            .collect();
        let ys: Vec<f64> = obs.iter().map(|o| o.0).collect();
        let m0 = fit_gpd(&ys)?;
        let m1 = fit_gpd_trend(&obs)?;
        let lr = lr_trend_test(&m1, &m0)?;
        let endpoint0 = (m0.gamma < 0.0).then(|| u - m0.sigma / m0.gamma);
        text += &format!(
            "u = {u}: {} excesses, loglik0 = {:.3}, gamma = {:.4}, loglik1 = {:.3}, D = {:.4}, p = {:.4}\n",
            obs.len(),
            m0.loglik,
            m0.gamma,
            m1.loglik,
            lr.deviance,
            lr.p_value
        );
        rows.push(TrendRow {
            threshold: u,
            n_exc: obs.len(),
            loglik0: m0.loglik,
            gamma0: m0.gamma,
            sigma0: m0.sigma,
            endpoint0,
            loglik1: m1.loglik,
            beta0: m1.beta0,
            beta1: m1.beta1,
            gamma1: m1.gamma,
            deviance: lr.deviance,
            p_value: lr.p_value,
        });
    }
    let summary = serde_json::json!({
        "command": "trend-test",
        "input": a.input.input.display().to_string(),
        "column": a.input.column,
        "time_column": a.time_column,
        "unit_divisor": a.input.unit_divisor,
        "n": data.values.len(),
        "fits": rows,
    });
    let mut out = Outputs::default();
    out.csv(
        "trend.csv",
        &[
            "threshold", "n_exc", "loglik0", "gamma0", "sigma0", "endpoint0", "loglik1", "beta0", "beta1",
            "gamma1", "deviance", "p_value",
        ],
        &rows,
    )?;
    out.json("summary.json", &summary)?;
    Ok((out, text))
}

fn model_from_args(a: &SimulateArgs) -> Result<ModelSpec> {
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| EvtError::Input(format!("model {} needs --{name}", a.model)))
    };
    let m = match a.model {
        1 => ModelSpec::M1 { tau1: need(a.tau1, "tau1")?, tau2: need(a.tau2, "tau2")? },
        2 => ModelSpec::M2 { lambda: need(a.lambda, "lambda")? },
        3 => ModelSpec::M3 { tau1: need(a.tau1, "tau1")?, tau2: need(a.tau2, "tau2")? },
        4 => ModelSpec::M4 { gamma: need(a.gamma, "gamma")? },
        other => return Err(EvtError::Input(format!("unknown model {other}; use 1, 2, 3 or 4"))),
    };
    m.validate()?;
    Ok(m)
}

#[derive(Debug, Serialize)]
struct PvalueRow {
    k_star: usize,
    test: &'static str,
    mean_p_heavy: Option<f64>,
    mean_p_short: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ErrorRow {
    replicate: usize,
    estimator: &'static str,
    error: Option<f64>,
}

fn simulate_outputs(report: &McReport) -> Result<Outputs> {
    let mut e_rows = Vec::new();
    let mut mse_rows = Vec::new();
    let mut err_rows = Vec::new();
    for c in &report.estimators {
        for p in &c.points {
            if let Some(e) = p.mean_abs_error {
                e_rows.push(EstimateRow { k_star: p.k_star, estimator: c.method.label(), value: e });
            }
            if let Some(m) = p.mse {
                mse_rows.push(EstimateRow { k_star: p.k_star, estimator: c.method.label(), value: m });
            }
        }
        for (j, e) in c.errors_at_k0.iter().enumerate() {
            err_rows.push(ErrorRow { replicate: j, estimator: c.method.label(), error: *e });
        }
    }
    let p_rows: Vec<PvalueRow> = report
        .tests
        .iter()
        .flat_map(|t| {
            t.points.iter().map(move |p| PvalueRow {
                k_star: p.k_star,
                test: t.test.label(),
                mean_p_heavy: p.mean_p_heavy,
                mean_p_short: p.mean_p_short,
            })
        })
        .collect();
    let k0: Vec<serde_json::Value> = report
        .estimators
        .iter()
        .map(|c| {
            let missing: usize = c.points.iter().map(|p| p.n_missing).sum();
            serde_json::json!({
                "estimator": c.method.label(),
                "k0_star": c.k0_star,
                "e_at_k0": c.e_at_k0,
                "missing_total": missing,
            })
        })
        .collect();
    let summary = serde_json::json!({
        "command": "simulate",
        "model": report.config.model,
        "n": report.config.n,
        "replicates": report.config.replicates,
        "seed": report.config.seed,
        "potml_stride": report.config.potml_stride,
        "true_endpoint": report.true_endpoint,
        "true_evi": report.true_evi,
        "optimum": k0,
    });
    let mut out = Outputs::default();
    out.csv("e_curve.csv", &["k_star", "estimator", "value"], &e_rows)?;
    out.csv("mse_curve.csv", &["k_star", "estimator", "value"], &mse_rows)?;
    out.csv("errors_at_k0.csv", &["replicate", "estimator", "error"], &err_rows)?;
    out.csv("pvalues.csv", &["k_star", "test", "mean_p_heavy", "mean_p_short"], &p_rows)?;
    out.json("summary.json", &summary)?;
    Ok(out)
}

fn simulate_cmd(a: &SimulateArgs) -> Result<(Outputs, String)> {
    let model = model_from_args(a)?;
    let mut cfg = McConfig::new(model, a.n, a.replicates, a.seed);
    cfg.estimators = parse_methods(&a.estimators)?;
    cfg.tests = parse_tests(&a.tests)?;
    cfg.potml_stride = a.potml_stride;
    cfg.threads = a.threads;
    let report = run_mc(&cfg)?;
    let mut text = format!("{}: n = {}, N = {}\n", model.label(), a.n, a.replicates);
    for c in &report.estimators {
        match (c.k0_star, c.e_at_k0) {
            (Some(k), Some(e)) => text += &format!("{:<8} k0* = {k:<5} E = {e:.5}\n", c.method.label()),
            _ => text += &format!("{:<8} no valid estimates\n", c.method.label()),
        }
    }
    Ok((simulate_outputs(&report)?, text))
}

/// Execute a parsed command; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let (result, dir) = match &cli.command {
        Command::Estimate(a) => (estimate_cmd(a), &a.input.output_dir),
        Command::TestDomain(a) => (test_domain_cmd(a), &a.input.output_dir),
        Command::TailProb(a) => (tail_prob_cmd(a), &a.input.output_dir),
        Command::TrendTest(a) => (trend_cmd(a), &a.input.output_dir),
        Command::Simulate(a) => (simulate_cmd(a), &a.output_dir),
    };
    match result.and_then(|(out, text)| out.write_to(dir).map(|_| text)) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Parse `args` and run; usage errors exit with 2.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            code
        }
    }
}
