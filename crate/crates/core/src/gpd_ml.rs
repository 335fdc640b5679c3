//! Maximum-likelihood fitting of the generalized Pareto distribution to
//! threshold excesses.
//!
//! Stationary fits profile the likelihood over τ = γ/σ: for fixed τ the
//! likelihood is maximized by γ(τ) = (1/k) Σ log(1 + τ yᵢ) and σ = γ/τ, so
//! the search is one-dimensional. The profile is scanned on a grid in
//! `u = τ·y_max` (scale free) and the best interior local maximum is
//! refined by golden-section search. Near `u = −1` the profile diverges
//! (the irregular γ < −1 region), so an interior maximum is always
//! preferred over the boundary.
//!
//! The trend model lets the scale vary as σ_t = exp(β₀ + β₁ t) and is
//! fitted with a Nelder–Mead simplex.

use serde::Serialize;

use crate::endpoint::{EndpointEstimate, Method};
use crate::error::{EvtError, Result};
use crate::sample::SortedSample;
use crate::stats_math::chi2_1_pvalue;

/// Smallest number of excesses accepted for a fit.
pub const MIN_EXCESSES: usize = 5;

const U_EDGE: f64 = 1e-8;
const HALF_GRID: usize = 256;
const POSITIVE_U_MAX: f64 = 1e6;
const GOLDEN_REL_TOL: f64 = 1e-10;

const TREND_MAX_ITER: usize = 500;
const TREND_MIN_OBS: usize = 10;

/// Stationary GPD fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GpdFit {
    pub gamma: f64,
    pub sigma: f64,
    pub loglik: f64,
    pub k_exc: usize,
    /// The profile likelihood had no interior maximum; the fit sits on the
    /// edge of the search interval.
    pub boundary: bool,
}

impl GpdFit {
    /// τ = γ/σ.
    pub fn tau(&self) -> f64 {
        self.gamma / self.sigma
    }
}

/// GPD fit with log-linear trend in the scale, σ_t = exp(β₀ + β₁ t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendGpdFit {
    pub beta0: f64,
    pub beta1: f64,
    pub gamma: f64,
    pub loglik: f64,
    pub n_exc: usize,
    pub iterations: usize,
}

/// Deviance test of the trend model against the stationary one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LrTest {
    pub deviance: f64,
    pub p_value: f64,
}

/// GPD log-likelihood Σ[−log σ − (1/γ + 1) log(1 + γ yᵢ/σ)]; −∞ outside the support.
pub fn gpd_loglik(excesses: &[f64], gamma: f64, sigma: f64) -> f64 {
    if !(sigma > 0.0) {
        return f64::NEG_INFINITY;
    }
    let ln_sigma = sigma.ln();
    let mut acc = 0.0;
    for &y in excesses {
        acc += gpd_log_density(y / sigma, gamma) - ln_sigma;
        if !acc.is_finite() {
            return f64::NEG_INFINITY;
        }
    }
    acc
}

/// log h_γ(z) for the standardized excess z.
#[inline]
fn gpd_log_density(z: f64, gamma: f64) -> f64 {
    if gamma.abs() < 1e-12 {
        return -z;
    }
    let arg = gamma * z;
    if !(arg > -1.0) {
        return f64::NEG_INFINITY;
    }
    -(1.0 / gamma + 1.0) * arg.ln_1p()
}

fn validate_excesses(excesses: &[f64]) -> Result<f64> {
    if excesses.len() < MIN_EXCESSES {
        return Err(EvtError::Degenerate(format!(
            "GPD fit needs at least {MIN_EXCESSES} excesses, got {}",
            excesses.len()
        )));
    }
    let mut y_max = 0.0f64;
    for &y in excesses {
        if !y.is_finite() || y < 0.0 {
            return Err(EvtError::Input(format!("excesses must be finite and >= 0, got {y}")));
        }
        y_max = y_max.max(y);
    }
    let first = excesses[0];
    if !(y_max > 0.0) || excesses.iter().all(|&y| y == first) {
        return Err(EvtError::Degenerate("all excesses are equal".into()));
    }
    Ok(y_max)
}

/// Profile log-likelihood as a function of u = τ·y_max.
struct Profile<'a> {
    excesses: &'a [f64],
    y_max: f64,
    mean: f64,
}

struct ProfilePoint {
    loglik: f64,
    gamma: f64,
    sigma: f64,
}

impl<'a> Profile<'a> {
    fn new(excesses: &'a [f64], y_max: f64) -> Self {
        let mean = excesses.iter().sum::<f64>() / excesses.len() as f64;
        Self { excesses, y_max, mean }
    }

    fn at(&self, u: f64) -> ProfilePoint {
        let k = self.excesses.len() as f64;
        if u == 0.0 {
            // Exponential limit.
            return ProfilePoint {
                loglik: -k * self.mean.ln() - k,
                gamma: 0.0,
                sigma: self.mean,
            };
        }
        let tau = u / self.y_max;
        let mut s = 0.0;
        for &y in self.excesses {
            s += (tau * y).ln_1p();
        }
        let gamma = s / k;
        let sigma = gamma / tau;
        let loglik = if sigma > 0.0 && gamma.is_finite() {
            -k * sigma.ln() - k * (1.0 + gamma)
        } else {
            f64::NEG_INFINITY
        };
        ProfilePoint { loglik, gamma, sigma }
    }
}

/// Grid of u values in (−1, 0): log-spaced towards both 0 and −1.
fn negative_grid() -> Vec<f64> {
    let mut grid = Vec::with_capacity(2 * HALF_GRID);
    let ln_lo = U_EDGE.ln();
    let ln_hi = 0.5f64.ln();
    // |u| from 1 - 1e-8 down to 0.5 (exclusive), then 0.5 down to 1e-8.
    for i in 0..HALF_GRID {
        let frac = i as f64 / HALF_GRID as f64;
        let gap = (ln_lo + frac * (ln_hi - ln_lo)).exp();
        grid.push(-(1.0 - gap));
    }
    for i in 0..HALF_GRID {
        let frac = i as f64 / (HALF_GRID - 1) as f64;
        grid.push(-(ln_hi + frac * (ln_lo - ln_hi)).exp());
    }
    grid
}

fn positive_grid() -> Vec<f64> {
    let ln_lo = U_EDGE.ln();
    let ln_hi = POSITIVE_U_MAX.ln();
    (0..HALF_GRID)
        .map(|i| (ln_lo + i as f64 / (HALF_GRID - 1) as f64 * (ln_hi - ln_lo)).exp())
        .collect()
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= GOLDEN_REL_TOL * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        c
    } else {
        d
    }
}

fn profile_fit(excesses: &[f64], grid: &[f64]) -> Result<GpdFit> {
    let y_max = validate_excesses(excesses)?;
    let profile = Profile::new(excesses, y_max);
    let values: Vec<f64> = grid.iter().map(|&u| profile.at(u).loglik).collect();

    let mut best: Option<usize> = None;
    for i in 1..grid.len() - 1 {
        let (l, c, r) = (values[i - 1], values[i], values[i + 1]);
        let is_peak = c.is_finite() && c >= l && c >= r && (c > l || c > r);
        if is_peak && best.is_none_or(|b| c > values[b]) {
            best = Some(i);
        }
    }

    let (u_hat, boundary) = match best {
        Some(i) => {
            let u = golden_max(|u| profile.at(u).loglik, grid[i - 1], grid[i + 1]);
            // Keep the grid point if refinement did not improve on it.
            if profile.at(u).loglik >= values[i] {
                (u, false)
            } else {
                (grid[i], false)
            }
        }
        None => {
            let last = grid.len() - 1;
            if values[0] >= values[last] {
                (grid[0], true)
            } else {
                (grid[last], true)
            }
        }
    };
    let point = profile.at(u_hat);
    if !point.loglik.is_finite() {
        return Err(EvtError::Degenerate("profile likelihood is not finite".into()));
    }
    Ok(GpdFit {
        gamma: point.gamma,
        sigma: point.sigma,
        loglik: point.loglik,
        k_exc: excesses.len(),
        boundary,
    })
}

/// ML fit of the GPD subject to γ < 0.
pub fn fit_gpd_negative_shape(excesses: &[f64]) -> Result<GpdFit> {
    profile_fit(excesses, &negative_grid())
}

/// ML fit of the GPD with unrestricted shape (stationary model of the trend test).
pub fn fit_gpd(excesses: &[f64]) -> Result<GpdFit> {
    let mut grid = negative_grid();
    grid.push(0.0);
    grid.extend(positive_grid());
    profile_fit(excesses, &grid)
}

/// Excesses of the top `k` observations over X_{n-k,n}.
pub fn top_excesses(s: &SortedSample, k: usize) -> Result<Vec<f64>> {
    if k == 0 || k >= s.len() {
        return Err(EvtError::Input(format!(
            "need 1 <= k <= n-1 excesses, got k={k}, n={}",
            s.len()
        )));
    }
    let threshold = s.top(k);
    Ok((0..k).map(|i| s.top(i) - threshold).collect())
}

/// Peaks-over-threshold ML endpoint X_{n-k,n} − σ̂/γ̂ with γ̂ < 0.
pub fn potml_endpoint(s: &SortedSample, k: usize) -> Result<EndpointEstimate> {
    let excesses = top_excesses(s, k)?;
    let fit = fit_gpd_negative_shape(&excesses)?;
    Ok(EndpointEstimate {
        method: Method::PotMl,
        k,
        k_star: k + 1,
        estimate: s.top(k) - fit.sigma / fit.gamma,
        gamma_hat: Some(fit.gamma),
        scale_hat: Some(fit.sigma),
    })
}

fn trend_negloglik(obs: &[(f64, f64)], p: [f64; 3]) -> f64 {
    let [b0, b1, gamma] = p;
    let mut acc = 0.0;
    for &(y, t) in obs {
        let eta = b0 + b1 * t;
        let z = y * (-eta).exp();
        acc += gpd_log_density(z, gamma) - eta;
    }
    if acc.is_finite() {
        -acc
    } else {
        f64::INFINITY
    }
}

struct SimplexOutcome {
    x: [f64; 3],
    f: f64,
    iterations: usize,
    converged: bool,
}

fn nelder_mead(f: impl Fn([f64; 3]) -> f64, x0: [f64; 3], step: [f64; 3]) -> SimplexOutcome {
    const F_TOL: f64 = 1e-11;
    const X_TOL: f64 = 1e-9;
    let mut pts: Vec<[f64; 3]> = vec![x0];
    for j in 0..3 {
        let mut p = x0;
        p[j] += step[j];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|&p| f(p)).collect();

    let lerp = |a: [f64; 3], b: [f64; 3], t: f64| -> [f64; 3] {
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]
    };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < TREND_MAX_ITER {
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i]).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = (vals[3] - vals[0]).abs();
        let best = pts[0];
        let size = pts[1..]
            .iter()
            .flat_map(|p| (0..3).map(move |j| (p[j] - best[j]).abs()))
            .fold(0.0f64, f64::max);
        if vals[0].is_finite() && spread <= F_TOL * (1.0 + vals[0].abs()) && size <= X_TOL {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = [0.0; 3];
        for p in &pts[..3] {
            for j in 0..3 {
                centroid[j] += p[j] / 3.0;
            }
        }
        let reflected = lerp(centroid, pts[3], -1.0);
        let fr = f(reflected);
        if fr < vals[0] {
            let expanded = lerp(centroid, pts[3], -2.0);
            let fe = f(expanded);
            if fe < fr {
                pts[3] = expanded;
                vals[3] = fe;
            } else {
                pts[3] = reflected;
                vals[3] = fr;
            }
        } else if fr < vals[2] {
            pts[3] = reflected;
            vals[3] = fr;
        } else {
            let (contracted, fc) = if fr < vals[3] {
                let c = lerp(centroid, reflected, 0.5);
                (c, f(c))
            } else {
                let c = lerp(centroid, pts[3], 0.5);
                (c, f(c))
            };
            if fc < vals[3].min(fr) {
                pts[3] = contracted;
                vals[3] = fc;
            } else {
                for i in 1..4 {
                    pts[i] = lerp(pts[0], pts[i], 0.5);
                    vals[i] = f(pts[i]);
                }
            }
        }
    }
    let best = (0..4).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    SimplexOutcome { x: pts[best], f: vals[best], iterations, converged }
}

/// ML fit of the GPD with scale exp(β₀ + β₁ t) to `(excess, time)` pairs.
pub fn fit_gpd_trend(obs: &[(f64, f64)]) -> Result<TrendGpdFit> {
    if obs.len() < TREND_MIN_OBS {
        return Err(EvtError::Degenerate(format!(
            "trend fit needs at least {TREND_MIN_OBS} excesses, got {}",
            obs.len()
        )));
    }
    if obs.iter().any(|&(y, t)| !y.is_finite() || !t.is_finite()) {
        return Err(EvtError::Input("non-finite excess or time value".into()));
    }
    let t0 = obs[0].1;
    let (t_min, t_max) = obs
        .iter()
        .fold((t0, t0), |(lo, hi), &(_, t)| (lo.min(t), hi.max(t)));
    if t_min == t_max {
        return Err(EvtError::Degenerate(
            "all excesses share one time value; the trend is not identifiable".into(),
        ));
    }
    let ys: Vec<f64> = obs.iter().map(|&(y, _)| y).collect();
    let stationary = fit_gpd(&ys)?;

    let x0 = [stationary.sigma.ln(), 0.0, stationary.gamma];
    let step = [0.1, 0.1 / (t_max - t_min), 0.05];
    let objective = |p: [f64; 3]| trend_negloglik(obs, p);

    let mut run = nelder_mead(objective, x0, step);
    let mut iterations = run.iterations;
    if !run.converged {
        let jittered = [run.x[0] + 0.5 * step[0], run.x[1] - 0.5 * step[1], run.x[2] + 0.5 * step[2]];
        let second = nelder_mead(objective, jittered, step);
        iterations += second.iterations;
        if !second.converged {
            return Err(EvtError::Optimization(format!(
                "simplex did not converge in {} iterations (best -loglik {:.6} at {:?})",
                iterations,
                second.f.min(run.f),
                if second.f < run.f { second.x } else { run.x }
            )));
        }
        if second.f < run.f {
            run = second;
        }
    }
    // The stationary optimum is a feasible trend model with β₁ = 0.
    let start_f = objective(x0);
    let (x, f) = if start_f < run.f { (x0, start_f) } else { (run.x, run.f) };
    Ok(TrendGpdFit {
        beta0: x[0],
        beta1: x[1],
        gamma: x[2],
        loglik: -f,
        n_exc: obs.len(),
        iterations,
    })
}

/// Likelihood-ratio (deviance) test of the trend model `m1` against the stationary `m0`.
pub fn lr_trend_test(m1: &TrendGpdFit, m0: &GpdFit) -> Result<LrTest> {
    let deviance = 2.0 * (m1.loglik - m0.loglik);
    if deviance < -1e-6 {
        return Err(EvtError::InconsistentFit(deviance));
    }
    let deviance = deviance.max(0.0);
    Ok(LrTest { deviance, p_value: chi2_1_pvalue(deviance)? })
}
