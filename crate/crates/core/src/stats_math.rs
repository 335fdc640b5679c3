//! Special functions and closed-form constants from the asymptotic theory of
//! the general endpoint estimator.
//!
//! Everything here is a pure function of its arguments. Formulas with a
//! removable singularity switch to a first-order series once the offending
//! quantity falls below [`SINGULARITY_EPS`] in absolute value.

use std::f64::consts::{LN_2, PI, SQRT_2};

use crate::error::{EvtError, Result};

/// Threshold below which removable singularities are replaced by their limit.
pub const SINGULARITY_EPS: f64 = 1e-6;

/// ln Γ(1/2) = ln √π.
const LN_SQRT_PI: f64 = 0.572_364_942_924_700_087_071_713_675_677;

/// Second-order parameters (γ, ρ) entering the bias constant `b_{γ,ρ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryParams {
    pub gamma: f64,
    pub rho: f64,
}

impl TheoryParams {
    pub fn new(gamma: f64, rho: f64) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(EvtError::Domain { what: "gamma", value: gamma });
        }
        if !(rho <= 0.0) {
            return Err(EvtError::Domain { what: "rho", value: rho });
        }
        Ok(Self { gamma, rho })
    }
}

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural logarithm of the gamma function for `a > 0`.
pub fn ln_gamma_fn(a: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(EvtError::Domain { what: "ln_gamma", value: a });
    }
    Ok(ln_gamma_pos(a))
}

fn ln_gamma_pos(a: f64) -> f64 {
    if a < 0.5 {
        // Reflection: Γ(a)Γ(1-a) = π / sin(πa).
        return (PI / (PI * a).sin()).ln() - ln_gamma_pos(1.0 - a);
    }
    let x = a - 1.0;
    let mut sum = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

/// Gamma function for positive arguments.
pub fn gamma_fn(a: f64) -> Result<f64> {
    ln_gamma_fn(a).map(f64::exp)
}

/// Upper regularized incomplete gamma Q(1/2, x) = erfc(√x), x ≥ 0.
fn upper_gamma_half(x: f64) -> f64 {
    const A: f64 = 0.5;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;
    if x <= 0.0 {
        return 1.0;
    }
    let log_prefactor = -x + A * x.ln() - LN_SQRT_PI;
    if x < A + 1.0 {
        // Series for P(a, x).
        let mut ap = A;
        let mut del = 1.0 / A;
        let mut sum = del;
        for _ in 0..500 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        1.0 - sum * log_prefactor.exp()
    } else {
        // Modified Lentz continued fraction for Q(a, x).
        let mut b = x + 1.0 - A;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - A);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        log_prefactor.exp() * h
    }
}

/// Standard normal distribution function Φ.
pub fn normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let tail = 0.5 * upper_gamma_half(0.5 * x * x);
    if x < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Standard normal survival function 1 − Φ(x), accurate in the upper tail.
pub fn normal_sf(x: f64) -> f64 {
    normal_cdf(-x)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal quantile Φ⁻¹(p) for p in (0, 1).
///
/// Acklam's rational approximation on the lower half, followed by one
/// Newton step against [`normal_cdf`].
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(EvtError::Domain { what: "normal_quantile", value: p });
    }
    if p > 0.5 {
        // 1 - p is exact for p in (0.5, 1).
        return Ok(-lower_normal_quantile(1.0 - p));
    }
    Ok(lower_normal_quantile(p))
}

fn lower_normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    // x <= 0 here, so normal_cdf(x) is computed from the accurate tail branch.
    let err = normal_cdf(x) - p;
    x - err / normal_pdf(x)
}

/// Gumbel distribution function Λ(x) = exp(−exp(−x)).
pub fn gumbel_cdf(x: f64) -> f64 {
    (-(-x).exp()).exp()
}

/// 1 − Λ(x), computed without cancellation for large x.
pub fn gumbel_sf(x: f64) -> f64 {
    -(-(-x).exp()).exp_m1()
}

/// Gumbel p-quantile ξ_p = −log(−log p).
pub fn gumbel_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(EvtError::Domain { what: "gumbel_quantile", value: p });
    }
    Ok(-(-p.ln()).ln())
}

/// (2^{-u} − 1)/u with its limit −log 2 (plus the linear term) near u = 0.
fn pow2_ratio(u: f64) -> f64 {
    if u.abs() <= SINGULARITY_EPS {
        -LN_2 + 0.5 * u * LN_2 * LN_2
    } else {
        (-u * LN_2).exp_m1() / u
    }
}

/// Asymptotic bias constant h(γ) of the general endpoint estimator, γ ≤ 0.
pub fn h_gamma(gamma: f64) -> Result<f64> {
    if !(gamma <= 0.0) {
        return Err(EvtError::Domain { what: "h_gamma", value: gamma });
    }
    if gamma.abs() <= SINGULARITY_EPS {
        return Ok(0.5 * LN_2 - gamma * LN_2 * LN_2 / 6.0);
    }
    Ok((pow2_ratio(gamma) / LN_2 + 1.0) / gamma)
}

/// Variance of the normal component in the limit law of the estimator, γ < 0.
#[allow(non_snake_case)]
pub fn var_N(gamma: f64) -> Result<f64> {
    if !(gamma < 0.0) || !gamma.is_finite() {
        return Err(EvtError::Domain { what: "var_N", value: gamma });
    }
    let bracket = pow2_ratio(2.0 * gamma + 1.0) - pow2_ratio(gamma + 1.0)
        + LN_2 / SQRT_2 * (-gamma * LN_2).exp_m1();
    Ok(1.0 + 2.0 / (gamma * LN_2 * LN_2) * bracket)
}

/// Second-order bias constant b_{γ,ρ}.
pub fn b_gamma_rho(p: TheoryParams) -> Result<f64> {
    let TheoryParams { gamma, rho } = p;
    if !(rho <= 0.0) {
        return Err(EvtError::Domain { what: "b_gamma_rho (rho)", value: rho });
    }
    if !(gamma < 0.0) {
        return Err(EvtError::Domain { what: "b_gamma_rho (gamma)", value: gamma });
    }
    if rho == 0.0 {
        let two_pow = (-gamma * LN_2).exp();
        return Ok((two_pow * (gamma * LN_2 + 1.0) - 1.0) / (gamma.powi(3) * LN_2));
    }
    let s = gamma + rho;
    if s.abs() <= SINGULARITY_EPS {
        return Ok(-0.5 * LN_2);
    }
    // (1 - 2^{-s}) / (s log 2) = -pow2_ratio(s) / log 2
    Ok((-pow2_ratio(s) / LN_2 - 1.0) / s)
}

/// α-quantile of the max-stable Weibull limit, q_α = (−log α)^{−γ}/γ.
pub fn weibull_limit_quantile(gamma: f64, alpha: f64) -> Result<f64> {
    if !(gamma < 0.0) || !gamma.is_finite() {
        return Err(EvtError::Domain { what: "weibull_limit_quantile (gamma)", value: gamma });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EvtError::Domain { what: "weibull_limit_quantile (alpha)", value: alpha });
    }
    Ok((-alpha.ln()).powf(-gamma) / gamma)
}

/// Upper tail probability of the χ² distribution with one degree of freedom.
pub fn chi2_1_pvalue(d: f64) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(EvtError::Domain { what: "chi2_1_pvalue", value: d });
    }
    // P(χ²₁ > D) = erfc(√(D/2)) = Q(1/2, D/2).
    Ok(upper_gamma_half(0.5 * d))
}
