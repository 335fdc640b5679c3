//! Probability of exceeding a fixed level, from the moment-type fit or the
//! GPD maximum-likelihood fit of the top `k` excesses.

use serde::Serialize;

use crate::endpoint::mominv;
use crate::error::{EvtError, Result};
use crate::gpd_ml::{fit_gpd_negative_shape, top_excesses};
use crate::sample::SortedSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TailMethod {
    MomInv,
    PotMl,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailProbEstimate {
    pub x: f64,
    pub k: usize,
    pub p_hat: f64,
    pub method: TailMethod,
}

/// (k/n) · max(0, 1 + γ (x − u)/a)^{−1/γ}, clamped to [0, 1].
fn plug_in(k: usize, n: usize, gamma: f64, scale: f64, threshold: f64, x: f64) -> f64 {
    let z = (x - threshold) / scale;
    let tail = if gamma.abs() < 1e-12 {
        (-z).exp()
    } else {
        let base = (1.0 + gamma * z).max(0.0);
        if base == 0.0 {
            // γ < 0: beyond the fitted endpoint. γ > 0: below the support, capped by the clamp.
            if gamma < 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            base.powf(-1.0 / gamma)
        }
    };
    (k as f64 / n as f64 * tail).clamp(0.0, 1.0)
}

fn check_x(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(EvtError::Input(format!("level x must be finite, got {x}")))
    }
}

/// Exceedance probability from the moment-type fit at `k`.
pub fn exceed_prob_mominv(s: &SortedSample, k: usize, x: f64) -> Result<TailProbEstimate> {
    check_x(x)?;
    let fit = mominv(s, k)?;
    Ok(TailProbEstimate {
        x,
        k,
        p_hat: plug_in(k, s.len(), fit.gamma_hat, fit.a_hat, fit.threshold, x),
        method: TailMethod::MomInv,
    })
}

/// Exceedance probability from the GPD ML fit (γ < 0) of the top `k` excesses.
pub fn exceed_prob_potml(s: &SortedSample, k: usize, x: f64) -> Result<TailProbEstimate> {
    check_x(x)?;
    let fit = fit_gpd_negative_shape(&top_excesses(s, k)?)?;
    Ok(TailProbEstimate {
        x,
        k,
        p_hat: plug_in(k, s.len(), fit.gamma, fit.sigma, s.top(k), x),
        method: TailMethod::PotMl,
    })
}
