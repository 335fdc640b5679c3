//! Right-endpoint estimators that need no likelihood optimization.
//!
//! The general estimator ([`fan`]) uses the top `2k` order statistics and
//! never falls below the sample maximum:
//!
//! ```text
//! x̂F = X_{n,n} + Σ_{i=0}^{k-1} a_{i,k} (X_{n-k,n} − X_{n-k-i,n}),
//! a_{i,k} = log((k+i+1)/(k+i)) / log 2,   Σ a_{i,k} = 1.
//! ```
//!
//! The moment-type estimator ([`mominv`]) and the reduced-bias variants
//! ([`rb_corrected`], [`weibull_upper_bound`]) plug in an estimate of the
//! extreme value index and of the scale function at the same `k`.

use std::f64::consts::LN_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{EvtError, Result};
use crate::sample::SortedSample;
use crate::stats_math::{gamma_fn, h_gamma, weibull_limit_quantile};

/// Endpoint estimation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Max,
    Fan,
    MomInv,
    Rb1,
    Rb2,
    PotMl,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Max => "MAX",
            Method::Fan => "FAN",
            Method::MomInv => "MOMINV",
            Method::Rb1 => "RB1",
            Method::Rb2 => "RB2",
            Method::PotMl => "POTML",
        }
    }

    /// Number of top order statistics the method consumes at tuning parameter `k`.
    pub fn k_star(self, k: usize) -> usize {
        match self {
            Method::Max => 1,
            Method::Fan | Method::Rb1 | Method::Rb2 => 2 * k,
            Method::MomInv | Method::PotMl => k + 1,
        }
    }

    /// Inverse of [`k_star`](Self::k_star); `None` when `k_star` is not attainable.
    pub fn k_for_k_star(self, k_star: usize) -> Option<usize> {
        match self {
            Method::Max => (k_star >= 1).then_some(0),
            Method::Fan | Method::Rb1 | Method::Rb2 => {
                (k_star >= 2 && k_star.is_multiple_of(2)).then_some(k_star / 2)
            }
            Method::MomInv => (k_star >= 3).then_some(k_star - 1),
            Method::PotMl => (k_star >= 6).then_some(k_star - 1),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Method {
    type Err = EvtError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace(['.', '_', '-'], "").as_str() {
            "MAX" => Ok(Method::Max),
            "FAN" => Ok(Method::Fan),
            "MOMINV" | "MOM" => Ok(Method::MomInv),
            "RB1" | "FANRB1" => Ok(Method::Rb1),
            "RB2" | "FANRB2" => Ok(Method::Rb2),
            "POTML" | "POTMLGPD" | "ML" => Ok(Method::PotMl),
            _ => Err(EvtError::Input(format!("unknown estimator '{s}'"))),
        }
    }
}

/// One endpoint estimate together with the tuning parameters that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndpointEstimate {
    pub method: Method,
    pub k: usize,
    pub k_star: usize,
    pub estimate: f64,
    pub gamma_hat: Option<f64>,
    pub scale_hat: Option<f64>,
}

/// Moment-type fit of the extreme value index and scale at threshold X_{n-k,n}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomInvFit {
    pub k: usize,
    pub gamma_hat: f64,
    pub a_hat: f64,
    pub threshold: f64,
    /// X_{n-k,n} − â/γ̂ when γ̂ < 0; `None` otherwise.
    pub endpoint: Option<f64>,
}

fn check_fan_k(s: &SortedSample, k: usize) -> Result<()> {
    if k == 0 || 2 * k > s.len() {
        return Err(EvtError::Input(format!(
            "general estimator needs 1 <= k and 2k <= n, got k={k}, n={}",
            s.len()
        )));
    }
    Ok(())
}

/// The weights a_{i,k}, i = 0..k.
pub fn fan_weights(k: usize) -> Vec<f64> {
    (0..k).map(|i| (1.0 / (k + i) as f64).ln_1p() / LN_2).collect()
}

/// General endpoint estimator at `k` (uses the top `2k` observations).
pub fn fan(s: &SortedSample, k: usize) -> Result<EndpointEstimate> {
    check_fan_k(s, k)?;
    Ok(EndpointEstimate {
        method: Method::Fan,
        k,
        k_star: 2 * k,
        estimate: fan_value(s, k),
        gamma_hat: None,
        scale_hat: None,
    })
}

pub(crate) fn fan_value(s: &SortedSample, k: usize) -> f64 {
    let threshold = s.top(k);
    let mut weighted = 0.0;
    for i in 0..k {
        let w = (1.0 / (k + i) as f64).ln_1p();
        weighted += w * (threshold - s.top(k + i));
    }
    s.max() + weighted / LN_2
}

/// The general estimator evaluated from its integral representation
///
/// ```text
/// x̂F = X_{n,n} + X_{n-k,n} − (1/log 2) ∫_{1/2}^{1} X_{n-[2ks],n} ds/s
/// ```
///
/// by exact integration of the step function in `s`. Serves as an
/// independent check on [`fan`].
pub fn fan_integral_oracle(s: &SortedSample, k: usize) -> Result<f64> {
    check_fan_k(s, k)?;
    let kk = 2.0 * k as f64;
    let mut integral = 0.0;
    // The integrand only jumps where 2ks crosses an integer.
    let mut lo = 0.5;
    for j in (k + 1)..=(2 * k) {
        let hi = j as f64 / kk;
        let mid = 0.5 * (lo + hi);
        let idx = (kk * mid).floor() as usize;
        integral += s.top(idx) * (hi / lo).ln();
        lo = hi;
    }
    Ok(s.max() + s.top(k) - integral / LN_2)
}

/// Sample maximum as an endpoint estimate.
pub fn max_estimate(s: &SortedSample) -> EndpointEstimate {
    EndpointEstimate {
        method: Method::Max,
        k: 0,
        k_star: 1,
        estimate: s.max(),
        gamma_hat: None,
        scale_hat: None,
    }
}

/// Moment-type index and scale estimators at `k`, with the implied endpoint.
pub fn mominv(s: &SortedSample, k: usize) -> Result<MomInvFit> {
    let n = s.len();
    if k < 2 || k >= n {
        return Err(EvtError::Input(format!(
            "moment estimator needs 2 <= k <= n-1, got k={k}, n={n}"
        )));
    }
    let m = s.excess_moments(k, false)?;
    if !(m.n2 > 0.0) {
        return Err(EvtError::Degenerate(format!(
            "all top-{k} excesses are zero"
        )));
    }
    // 1 − N1²/N2 written as (N2 − N1²)/N2.
    let spread = m.n2 - m.n1 * m.n1;
    if !(spread > 0.0) {
        return Err(EvtError::Degenerate(format!(
            "top-{k} excesses are all equal"
        )));
    }
    let gamma_hat = 1.0 - 0.5 * m.n2 / spread;
    let a_hat = m.n1 * (1.0 - gamma_hat);
    let threshold = s.top(k);
    let endpoint = (gamma_hat < 0.0).then(|| threshold - a_hat / gamma_hat);
    Ok(MomInvFit { k, gamma_hat, a_hat, threshold, endpoint })
}

/// [`mominv`] as an endpoint estimate; unavailable when γ̂ ≥ 0.
pub fn mominv_estimate(s: &SortedSample, k: usize) -> Result<EndpointEstimate> {
    let fit = mominv(s, k)?;
    let estimate = fit.endpoint.ok_or(EvtError::Unavailable {
        method: "MOMINV",
        gamma_hat: fit.gamma_hat,
    })?;
    Ok(EndpointEstimate {
        method: Method::MomInv,
        k,
        k_star: k + 1,
        estimate,
        gamma_hat: Some(fit.gamma_hat),
        scale_hat: Some(fit.a_hat),
    })
}

/// Reduced-bias versions of the general estimator.
///
/// Order 1 removes `h(γ̂)·â`; order 2 additionally removes the mean of the
/// Weibull limit, `Γ(1−γ̂)/γ̂ · â · k^γ̂`. Both use γ̂ and â from
/// [`mominv`] at the same `k`.
pub fn rb_corrected(s: &SortedSample, k: usize, order: u8) -> Result<EndpointEstimate> {
    let method = match order {
        1 => Method::Rb1,
        2 => Method::Rb2,
        _ => {
            return Err(EvtError::Input(format!(
                "reduced-bias order must be 1 or 2, got {order}"
            )))
        }
    };
    check_fan_k(s, k)?;
    let fit = mominv(s, k)?;
    let g = fit.gamma_hat;
    let admissible = if order == 1 { g <= 0.0 } else { g < 0.0 };
    if !admissible {
        return Err(EvtError::Unavailable { method: method.label(), gamma_hat: g });
    }
    let mut estimate = fan_value(s, k) - h_gamma(g)? * fit.a_hat;
    if order == 2 {
        estimate -= gamma_fn(1.0 - g)? / g * fit.a_hat * (k as f64).powf(g);
    }
    Ok(EndpointEstimate {
        method,
        k,
        k_star: 2 * k,
        estimate,
        gamma_hat: Some(g),
        scale_hat: Some(fit.a_hat),
    })
}

/// Approximate 100(1−α)% confidence upper bound for the endpoint,
/// `x̂F − â [h(γ̂) + k^γ̂ q_α]`, with q_α the α-quantile of the Weibull limit.
pub fn weibull_upper_bound(s: &SortedSample, k: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EvtError::Domain { what: "alpha", value: alpha });
    }
    check_fan_k(s, k)?;
    let fit = mominv(s, k)?;
    let g = fit.gamma_hat;
    if !(g < 0.0) {
        return Err(EvtError::Unavailable { method: "upper bound", gamma_hat: g });
    }
    let q = weibull_limit_quantile(g, alpha)?;
    Ok(fan_value(s, k) - fit.a_hat * (h_gamma(g)? + (k as f64).powf(g) * q))
}
