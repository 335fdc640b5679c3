//! Parent models with a finite right endpoint and the Monte Carlo harness
//! that compares endpoint estimators on them.
//!
//! Replicate `j` draws from its own ChaCha8 stream seeded with
//! `splitmix64(seed, j)`, and per-replicate results land in fixed slots
//! before a serial reduction. Reports therefore do not depend on the number
//! of worker threads.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain_tests::TestKind;
use crate::endpoint::{fan, max_estimate, mominv_estimate, rb_corrected, Method};
use crate::error::{EvtError, Result};
use crate::gpd_ml::potml_endpoint;
use crate::sample::SortedSample;

/// Environment variable capping the worker count (0 = rayon default).
pub const THREADS_ENV: &str = "EVT_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id")]
pub enum ModelSpec {
    /// F(x) = 1 − [1 + (−x)^{−τ1}]^{−τ2}, x < 0.
    M1 { tau1: f64, tau2: f64 },
    /// X = −1/(e^Z − 1) with Z ~ Gamma(2, λ).
    M2 { lambda: f64 },
    /// F(x) = 1 − [1 + ((1−x)/x)^{−τ1}]^{−τ2}, 0 < x < 1.
    M3 { tau1: f64, tau2: f64 },
    /// Beta(1, −1/γ): F(x) = 1 − (1 − x)^{−1/γ}, 0 < x < 1.
    M4 { gamma: f64 },
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ModelSpec::M1 { tau1, tau2 } | ModelSpec::M3 { tau1, tau2 } => tau1 > 0.0 && tau2 > 0.0,
            ModelSpec::M2 { lambda } => lambda > 0.0,
            ModelSpec::M4 { gamma } => gamma < 0.0,
        };
        let finite = match *self {
            ModelSpec::M1 { tau1, tau2 } | ModelSpec::M3 { tau1, tau2 } => tau1.is_finite() && tau2.is_finite(),
            ModelSpec::M2 { lambda } => lambda.is_finite(),
            ModelSpec::M4 { gamma } => gamma.is_finite(),
        };
        if ok && finite {
            Ok(())
        } else {
            Err(EvtError::Input(format!("invalid model parameters: {self:?}")))
        }
    }

    pub fn true_evi(&self) -> f64 {
        match *self {
            ModelSpec::M1 { tau1, tau2 } | ModelSpec::M3 { tau1, tau2 } => -1.0 / (tau1 * tau2),
            ModelSpec::M2 { lambda } => -1.0 / lambda,
            ModelSpec::M4 { gamma } => gamma,
        }
    }

    pub fn true_endpoint(&self) -> f64 {
        match self {
            ModelSpec::M1 { .. } | ModelSpec::M2 { .. } => 0.0,
            ModelSpec::M3 { .. } | ModelSpec::M4 { .. } => 1.0,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            ModelSpec::M1 { tau1, tau2 } => format!("M1({tau1},{tau2})"),
            ModelSpec::M2 { lambda } => format!("M2({lambda})"),
            ModelSpec::M3 { tau1, tau2 } => format!("M3({tau1},{tau2})"),
            ModelSpec::M4 { gamma } => format!("M4({gamma})"),
        }
    }

    /// Quantile at upper-tail probability `q = 1 − p`; `None` for M2.
    fn upper_quantile(&self, q: f64) -> Option<f64> {
        match *self {
            ModelSpec::M1 { tau1, tau2 } => Some(-(q.powf(-1.0 / tau2) - 1.0).powf(-1.0 / tau1)),
            ModelSpec::M3 { tau1, tau2 } => Some(1.0 / (1.0 + (q.powf(-1.0 / tau2) - 1.0).powf(-1.0 / tau1))),
            ModelSpec::M4 { gamma } => Some(1.0 - q.powf(-gamma)),
            ModelSpec::M2 { .. } => None,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.sample(Open01);
        match *self {
            ModelSpec::M2 { lambda } => {
                let u2: f64 = rng.sample(Open01);
                let z = -(u.ln() + u2.ln()) / lambda;
                -1.0 / z.exp_m1()
            }
            _ => self.upper_quantile(u).unwrap_or(f64::NAN),
        }
    }
}

/// Inverse distribution function of models M1, M3 and M4.
pub fn model_quantile(m: &ModelSpec, p: f64) -> Result<f64> {
    m.validate()?;
    if !(p > 0.0 && p < 1.0) {
        return Err(EvtError::Domain { what: "model_quantile", value: p });
    }
    m.upper_quantile(1.0 - p).ok_or_else(|| {
        EvtError::Unsupported("model M2 has no closed-form quantile function".into())
    })
}

/// SplitMix64 finalizer applied to `seed` advanced by `stream + 1` golden-ratio steps.
pub fn splitmix64(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// RNG of replicate `j` under master seed `seed`.
pub fn replicate_rng(seed: u64, j: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed, j))
}

fn sample_with(m: &ModelSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<SortedSample> {
    let v: Vec<f64> = (0..n).map(|_| m.draw(rng)).collect();
    SortedSample::from_values(&v)
}

/// `n` draws from model `m`, deterministic in `(m, n, seed)`.
pub fn model_sample(m: &ModelSpec, n: usize, seed: u64) -> Result<SortedSample> {
    m.validate()?;
    if n == 0 {
        return Err(EvtError::Input("sample size must be at least 1".into()));
    }
    sample_with(m, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub model: ModelSpec,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub estimators: Vec<Method>,
    pub kstar_grid: Vec<usize>,
    pub tests: Vec<TestKind>,
    /// POTML is only evaluated at k* divisible by this stride.
    pub potml_stride: usize,
    /// Worker threads; `None` reads [`THREADS_ENV`], 0 means rayon's default.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl McConfig {
    /// Defaults: MAX, FAN, MOMINV, POTML; even k* in 2..=n; G*, R*, Gr*.
    pub fn new(model: ModelSpec, n: usize, replicates: usize, seed: u64) -> Self {
        Self {
            model,
            n,
            replicates,
            seed,
            estimators: vec![Method::Max, Method::Fan, Method::MomInv, Method::PotMl],
            kstar_grid: default_kstar_grid(n),
            tests: vec![TestKind::GStar, TestKind::Ratio, TestKind::Greenwood],
            potml_stride: 10,
            threads: None,
        }
    }

    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.n < 4 {
            return Err(EvtError::Input(format!("n must be at least 4, got {}", self.n)));
        }
        if self.replicates == 0 {
            return Err(EvtError::Input("need at least one replicate".into()));
        }
        if self.kstar_grid.is_empty() {
            return Err(EvtError::Input("empty k* grid".into()));
        }
        if let Some(&bad) = self.kstar_grid.iter().find(|&&k| k == 0 || k > self.n) {
            return Err(EvtError::Input(format!("k*={bad} outside [1, {}]", self.n)));
        }
        if self.potml_stride == 0 {
            return Err(EvtError::Input("POTML stride must be positive".into()));
        }
        Ok(())
    }

    fn evaluates(&self, method: Method, k_star: usize) -> Option<usize> {
        let k = method.k_for_k_star(k_star)?;
        if method == Method::PotMl && !k_star.is_multiple_of(self.potml_stride) {
            return None;
        }
        Some(k)
    }
}

/// Even k* from 2 to n.
pub fn default_kstar_grid(n: usize) -> Vec<usize> {
    (1..=n / 2).map(|i| 2 * i).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub k_star: usize,
    pub k: usize,
    /// E(k*) over replicates where the estimate exists.
    pub mean_abs_error: Option<f64>,
    pub bias: Option<f64>,
    pub mse: Option<f64>,
    pub n_valid: usize,
    pub n_missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorCurve {
    pub method: Method,
    pub points: Vec<CurvePoint>,
    pub k0_star: Option<usize>,
    pub e_at_k0: Option<f64>,
    /// ε(j, k₀*) for every replicate, `None` where the estimate is missing.
    pub errors_at_k0: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestCurvePoint {
    pub k_star: usize,
    pub k: usize,
    pub mean_p_heavy: Option<f64>,
    pub mean_p_short: Option<f64>,
    pub n_valid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestCurve {
    pub test: TestKind,
    pub points: Vec<TestCurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub config: McConfig,
    pub true_endpoint: f64,
    pub true_evi: f64,
    pub estimators: Vec<EstimatorCurve>,
    pub tests: Vec<TestCurve>,
}

impl McReport {
    pub fn curve(&self, method: Method) -> Option<&EstimatorCurve> {
        self.estimators.iter().find(|c| c.method == method)
    }
}

/// k used by a test at k*: G* needs 2k observations, the others k + 1.
fn test_k(test: TestKind, k_star: usize) -> Option<usize> {
    match test {
        TestKind::GStar => (k_star >= 2).then_some(k_star / 2),
        _ => (k_star >= 2).then_some(k_star - 1),
    }
}

fn estimate(method: Method, s: &SortedSample, k: usize) -> Result<f64> {
    Ok(match method {
        Method::Max => max_estimate(s).estimate,
        Method::Fan => fan(s, k)?.estimate,
        Method::MomInv => mominv_estimate(s, k)?.estimate,
        Method::Rb1 => rb_corrected(s, k, 1)?.estimate,
        Method::Rb2 => rb_corrected(s, k, 2)?.estimate,
        Method::PotMl => potml_endpoint(s, k)?.estimate,
    })
}

/// Per-replicate output: errors[estimator][grid index] and p-values[test][grid index].
struct Replicate {
    errors: Vec<Vec<Option<f64>>>,
    pvalues: Vec<Vec<Option<(f64, f64)>>>,
}

fn run_replicate(cfg: &McConfig, j: usize) -> Result<Replicate> {
    let mut rng = replicate_rng(cfg.seed, j as u64);
    let s = sample_with(&cfg.model, cfg.n, &mut rng)?;
    let xf = cfg.model.true_endpoint();
    let max_err = s.max() - xf;

    let errors = cfg
        .estimators
        .iter()
        .map(|&m| {
            cfg.kstar_grid
                .iter()
                .map(|&ks| match cfg.evaluates(m, ks) {
                    None => None,
                    Some(_) if m == Method::Max => Some(max_err),
                    Some(k) => estimate(m, &s, k).ok().map(|e| e - xf),
                })
                .collect()
        })
        .collect();
    let pvalues = cfg
        .tests
        .iter()
        .map(|&t| {
            cfg.kstar_grid
                .iter()
                .map(|&ks| {
                    let k = test_k(t, ks)?;
                    t.run(&s, k).ok().map(|r| (r.p_heavy, r.p_short))
                })
                .collect()
        })
        .collect();
    Ok(Replicate { errors, pvalues })
}

fn worker_count(cfg: &McConfig) -> usize {
    cfg.threads.unwrap_or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(0)
    })
}

/// Run the Monte Carlo experiment described by `cfg`.
pub fn run_mc(cfg: &McConfig) -> Result<McReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(cfg))
        .build()
        .map_err(|e| EvtError::Input(format!("cannot start worker pool: {e}")))?;
    let reps: Vec<Replicate> = pool.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|j| run_replicate(cfg, j))
            .collect::<Result<Vec<_>>>()
    })?;

    let estimators = cfg
        .estimators
        .iter()
        .enumerate()
        .map(|(ei, &method)| {
            let mut points = Vec::new();
            let mut grid_idx = Vec::new();
            for (gi, &ks) in cfg.kstar_grid.iter().enumerate() {
                let Some(k) = cfg.evaluates(method, ks) else { continue };
                let (mut abs, mut sum, mut sq, mut valid) = (0.0, 0.0, 0.0, 0usize);
                for r in &reps {
                    if let Some(e) = r.errors[ei][gi] {
                        abs += e.abs();
                        sum += e;
                        sq += e * e;
                        valid += 1;
                    }
                }
                let mean = |x: f64| (valid > 0).then(|| x / valid as f64);
                points.push(CurvePoint {
                    k_star: ks,
                    k,
                    mean_abs_error: mean(abs),
                    bias: mean(sum),
                    mse: mean(sq),
                    n_valid: valid,
                    n_missing: reps.len() - valid,
                });
                grid_idx.push(gi);
            }
            let best = argmin_point(&points);
            EstimatorCurve {
                method,
                k0_star: best.map(|i| points[i].k_star),
                e_at_k0: best.and_then(|i| points[i].mean_abs_error),
                errors_at_k0: match best {
                    Some(i) => reps.iter().map(|r| r.errors[ei][grid_idx[i]]).collect(),
                    None => vec![None; reps.len()],
                },
                points,
            }
        })
        .collect();

    let tests = cfg
        .tests
        .iter()
        .enumerate()
        .map(|(ti, &test)| {
            let points = cfg
                .kstar_grid
                .iter()
                .enumerate()
                .filter_map(|(gi, &ks)| {
                    let k = test_k(test, ks)?;
                    let (mut heavy, mut short, mut valid) = (0.0, 0.0, 0usize);
                    for r in &reps {
                        if let Some((h, s)) = r.pvalues[ti][gi] {
                            heavy += h;
                            short += s;
                            valid += 1;
                        }
                    }
                    let mean = |x: f64| (valid > 0).then(|| x / valid as f64);
                    Some(TestCurvePoint {
                        k_star: ks,
                        k,
                        mean_p_heavy: mean(heavy),
                        mean_p_short: mean(short),
                        n_valid: valid,
                    })
                })
                .collect();
            TestCurve { test, points }
        })
        .collect();

    Ok(McReport {
        true_endpoint: cfg.model.true_endpoint(),
        true_evi: cfg.model.true_evi(),
        config: cfg.clone(),
        estimators,
        tests,
    })
}

/// Index of the smallest E(k*); the first one on ties.
fn argmin_point(points: &[CurvePoint]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        if let Some(e) = p.mean_abs_error {
            if best.is_none_or(|(_, b)| e < b) {
                best = Some((i, e));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// L1-optimal k* of `method` in `report`.
pub fn k0_star(report: &McReport, method: Method) -> Result<usize> {
    let curve = report
        .curve(method)
        .ok_or_else(|| EvtError::Input(format!("{method} not in the report")))?;
    argmin_point(&curve.points)
        .map(|i| curve.points[i].k_star)
        .ok_or_else(|| EvtError::Input(format!("{method} has an empty error curve")))
}
