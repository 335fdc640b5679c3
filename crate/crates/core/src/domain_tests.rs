//! Tests of the Gumbel max-domain null (γ = 0) against short or heavy tails,
//! and the rule that picks `k` from the first rejection.
//!
//! | test        | null law | small values point to |
//! |-------------|----------|-----------------------|
//! | G*          | Gumbel   | short tail            |
//! | R* (ratio)  | Gumbel   | short tail            |
//! | Gr*         | normal   | short tail            |
//! | T1*         | normal   | short tail            |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::endpoint::fan;
use crate::error::{EvtError, Result};
use crate::sample::SortedSample;
use crate::stats_math::{gumbel_cdf, gumbel_sf, normal_cdf, normal_sf};

/// Level used for [`DomainTestResult::reject_two_sided`].
pub const DEFAULT_ALPHA: f64 = 0.05;
/// Smallest `k` considered by the k-selection rule unless overridden.
pub const DEFAULT_K_MIN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TestKind {
    GStar,
    Ratio,
    Greenwood,
    T1,
}

impl TestKind {
    pub const ALL: [TestKind; 4] = [TestKind::GStar, TestKind::Ratio, TestKind::Greenwood, TestKind::T1];

    pub fn label(self) -> &'static str {
        match self {
            TestKind::GStar => "GSTAR",
            TestKind::Ratio => "RATIO",
            TestKind::Greenwood => "GREENWOOD",
            TestKind::T1 => "T1",
        }
    }

    /// Evaluate this test at `k`.
    pub fn run(self, s: &SortedSample, k: usize) -> Result<DomainTestResult> {
        match self {
            TestKind::GStar => g_star(s, k),
            TestKind::Ratio => ratio_star(s, k),
            TestKind::Greenwood => greenwood_star(s, k),
            TestKind::T1 => t1_star(s, k),
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for TestKind {
    type Err = EvtError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace(['-', '_', '*'], "").as_str() {
            "G" | "GSTAR" => Ok(TestKind::GStar),
            "R" | "RATIO" | "RSTAR" => Ok(TestKind::Ratio),
            "GR" | "GREENWOOD" | "GRSTAR" => Ok(TestKind::Greenwood),
            "T1" | "T1STAR" => Ok(TestKind::T1),
            _ => Err(EvtError::Input(format!("unknown test '{s}'"))),
        }
    }
}

/// Which alternative a rejection is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    TwoSided,
    Short,
    Heavy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomainTestResult {
    pub test: TestKind,
    pub k: usize,
    pub raw: f64,
    pub normalized: f64,
    pub p_heavy: f64,
    pub p_short: f64,
    /// Two-sided rejection at [`DEFAULT_ALPHA`].
    pub reject_two_sided: bool,
}

impl DomainTestResult {
    fn new(test: TestKind, k: usize, raw: f64, normalized: f64, p_short: f64, p_heavy: f64) -> Self {
        let mut r = Self {
            test,
            k,
            raw,
            normalized,
            p_heavy,
            p_short,
            reject_two_sided: false,
        };
        r.reject_two_sided = r.rejects(DEFAULT_ALPHA, Side::TwoSided);
        r
    }

    pub fn rejects(&self, alpha: f64, side: Side) -> bool {
        match side {
            Side::TwoSided => self.p_short.min(self.p_heavy) < alpha / 2.0,
            Side::Short => self.p_short < alpha,
            Side::Heavy => self.p_heavy < alpha,
        }
    }
}

fn gumbel_result(test: TestKind, k: usize, raw: f64, z: f64) -> DomainTestResult {
    DomainTestResult::new(test, k, raw, z, gumbel_cdf(z), gumbel_sf(z))
}

fn normal_result(test: TestKind, k: usize, raw: f64, z: f64) -> DomainTestResult {
    DomainTestResult::new(test, k, raw, z, normal_cdf(z), normal_sf(z))
}

/// G = (x̂F − X_{n-k,n}) / (X_{n-k,n} − X_{n-2k,n}) and
/// G* = log 2 · G − (log k + log 2 / 2), Gumbel under the null.
pub fn g_star(s: &SortedSample, k: usize) -> Result<DomainTestResult> {
    let n = s.len();
    if k == 0 || 2 * k >= n {
        return Err(EvtError::Input(format!("G* needs 1 <= k and 2k < n, got k={k}, n={n}")));
    }
    let threshold = s.top(k);
    let denom = threshold - s.top(2 * k);
    if denom == 0.0 {
        return Err(EvtError::Degenerate(format!("X_(n-k) equals X_(n-2k) at k={k}")));
    }
    let xf = fan(s, k)?.estimate;
    let g = (xf - threshold) / denom;
    let ln2 = std::f64::consts::LN_2;
    let z = ln2 * g - ((k as f64).ln() + ln2 / 2.0);
    Ok(gumbel_result(TestKind::GStar, k, g, z))
}

fn positive_n1(s: &SortedSample, k: usize) -> Result<(f64, f64)> {
    let m = s.excess_moments(k, false)?;
    if !(m.n1 > 0.0) {
        return Err(EvtError::Degenerate(format!("top {k} excesses are all zero")));
    }
    Ok((m.n1, m.n2))
}

/// R = (X_{n,n} − X_{n-k,n}) / N1 and R* = R − log k.
pub fn ratio_star(s: &SortedSample, k: usize) -> Result<DomainTestResult> {
    let (n1, _) = positive_n1(s, k)?;
    let r = (s.max() - s.top(k)) / n1;
    Ok(gumbel_result(TestKind::Ratio, k, r, r - (k as f64).ln()))
}

/// Gr = N2 / N1² and Gr* = √(k/4) (Gr − 2).
pub fn greenwood_star(s: &SortedSample, k: usize) -> Result<DomainTestResult> {
    let (n1, n2) = positive_n1(s, k)?;
    let gr = n2 / (n1 * n1);
    Ok(normal_result(TestKind::Greenwood, k, gr, (k as f64 / 4.0).sqrt() * (gr - 2.0)))
}

/// T1* = √k · log k · T1 built on log-moment scale estimate T.
pub fn t1_star(s: &SortedSample, k: usize) -> Result<DomainTestResult> {
    let m = s.excess_moments(k, true)?;
    let threshold = s.top(k);
    let range = s.max() - threshold;
    if range == 0.0 {
        return Err(EvtError::Degenerate(format!("X_(n) equals X_(n-k) at k={k}")));
    }
    let spread = 1.0 - m.n1 * m.n1 / m.n2;
    if !(spread > 0.0) {
        return Err(EvtError::Degenerate(format!("top {k} log-excesses are all equal")));
    }
    let t = threshold * (m.n1 / 2.0) / spread;
    let mut acc = 0.0;
    for i in 1..=k {
        acc += s.top(i) - threshold - t;
    }
    let kf = k as f64;
    let t1 = acc / (kf * range);
    Ok(normal_result(TestKind::T1, k, t1, kf.sqrt() * kf.ln() * t1))
}

/// Results of one test for every `k` in `ks`; values of `k` where the test
/// is undefined are skipped.
pub fn scan(s: &SortedSample, test: TestKind, ks: impl IntoIterator<Item = usize>) -> Vec<DomainTestResult> {
    ks.into_iter().filter_map(|k| test.run(s, k).ok()).collect()
}

/// Smallest `k >= k_min` at which the series rejects on `side`.
pub fn first_rejection(
    series: &[DomainTestResult],
    alpha: f64,
    k_min: usize,
    side: Side,
) -> Result<Option<usize>> {
    if series.is_empty() {
        return Err(EvtError::Input("empty test series".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EvtError::Domain { what: "alpha", value: alpha });
    }
    Ok(series
        .iter()
        .filter(|r| r.k >= k_min)
        .find(|r| r.rejects(alpha, side))
        .map(|r| r.k))
}

/// k_opt = max over tests of the first rejecting `k`; `None` if any test never rejects.
pub fn select_k_opt(
    series: &[(&[DomainTestResult], Side)],
    alpha: f64,
    k_min: usize,
) -> Result<Option<usize>> {
    if series.is_empty() {
        return Err(EvtError::Input("no test series supplied".into()));
    }
    let mut k_opt = 0;
    for &(s, side) in series {
        match first_rejection(s, alpha, k_min, side)? {
            Some(k) => k_opt = k_opt.max(k),
            None => return Ok(None),
        }
    }
    Ok(Some(k_opt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(v: &[f64]) -> SortedSample {
        SortedSample::from_values(v).unwrap()
    }

    #[test]
    fn g_star_hand_example() {
        let r = g_star(&sample(&[7.0, 9.0, 10.0]), 1).unwrap();
        assert!((r.raw - 0.5).abs() < 1e-15);
        assert!(r.normalized.abs() < 1e-15);
        assert!((r.p_short - (-1.0f64).exp()).abs() < 1e-15);
        assert!((r.p_short + r.p_heavy - 1.0).abs() < 1e-15);
    }

    #[test]
    fn g_star_errors() {
        assert!(g_star(&sample(&[1.0, 2.0]), 1).is_err());
        assert!(matches!(
            g_star(&sample(&[1.0, 1.0, 2.0]), 1),
            Err(EvtError::Degenerate(_))
        ));
    }

    #[test]
    fn ratio_hand_example() {
        let r = ratio_star(&sample(&[1.0, 3.0, 4.0, 5.0]), 2).unwrap();
        assert!((r.raw - 4.0 / 3.0).abs() < 1e-15);
        assert!((r.normalized - (4.0 / 3.0 - 2f64.ln())).abs() < 1e-15);
        assert!((r.normalized - 0.6402).abs() < 1e-4);
    }

    #[test]
    fn greenwood_hand_example() {
        let r = greenwood_star(&sample(&[1.0, 3.0, 4.0, 5.0]), 2).unwrap();
        assert!((r.raw - 2.5 / 2.25).abs() < 1e-15);
        assert!((r.normalized + 0.6285).abs() < 1e-4);
        assert!((r.p_short - normal_cdf(r.normalized)).abs() < 1e-15);
    }

    #[test]
    fn constant_excesses_are_degenerate() {
        let s = sample(&[1.0, 2.0, 2.0, 2.0]);
        assert!(matches!(ratio_star(&s, 2), Err(EvtError::Degenerate(_))));
        assert!(matches!(greenwood_star(&s, 2), Err(EvtError::Degenerate(_))));
        assert!(matches!(t1_star(&s, 2), Err(EvtError::Degenerate(_))));
    }

    #[test]
    fn t1_needs_positive_data() {
        let s = sample(&[-1.0, 2.0, 3.0, 5.0]);
        assert!(matches!(t1_star(&s, 3), Err(EvtError::Input(_))));
        let r = t1_star(&s, 2).unwrap();
        assert!(r.normalized.is_finite());
    }

    fn exp_grid(n: usize) -> SortedSample {
        let v: Vec<f64> = (1..=n).map(|i| -(1.0 - (i as f64 - 0.5) / n as f64).ln()).collect();
        sample(&v)
    }

    #[test]
    fn null_behaviour_on_exponential_grid() {
        let s = exp_grid(2000);
        for test in TestKind::ALL {
            let r = test.run(&s, 200).unwrap();
            assert!(!r.reject_two_sided, "{test} rejects: {r:?}");
        }
    }

    #[test]
    fn uniform_grid_is_short_tailed() {
        let v: Vec<f64> = (1..=2000).map(|i| (i as f64 - 0.5) / 2000.0).collect();
        let s = sample(&v);
        for test in TestKind::ALL {
            let r = test.run(&s, 400).unwrap();
            assert!(r.rejects(0.05, Side::Short), "{test}: {r:?}");
        }
    }

    fn fake(k: usize, p_short: f64) -> DomainTestResult {
        DomainTestResult::new(TestKind::Greenwood, k, 0.0, 0.0, p_short, 1.0 - p_short)
    }

    #[test]
    fn k_selection_rules() {
        let none: Vec<_> = (20..200).map(|k| fake(k, 0.5)).collect();
        assert_eq!(first_rejection(&none, 0.05, 20, Side::TwoSided).unwrap(), None);
        let one: Vec<_> = (20..200).map(|k| fake(k, if k >= 100 { 0.001 } else { 0.4 })).collect();
        assert_eq!(first_rejection(&one, 0.05, 20, Side::TwoSided).unwrap(), Some(100));
        let other: Vec<_> = (20..200).map(|k| fake(k, if k >= 150 { 0.999 } else { 0.4 })).collect();
        assert_eq!(
            select_k_opt(&[(&one, Side::TwoSided), (&other, Side::TwoSided)], 0.05, 20).unwrap(),
            Some(150)
        );
        assert_eq!(select_k_opt(&[(&one, Side::Short), (&none, Side::TwoSided)], 0.05, 20).unwrap(), None);
        // Rejections below k_min are ignored.
        let early: Vec<_> = (5..200).map(|k| fake(k, if !(20..60).contains(&k) { 0.001 } else { 0.4 })).collect();
        assert_eq!(first_rejection(&early, 0.05, 20, Side::Short).unwrap(), Some(60));
        assert!(first_rejection(&[], 0.05, 20, Side::Short).is_err());
        assert!(select_k_opt(&[], 0.05, 20).is_err());
    }

    #[test]
    fn test_names_parse() {
        for t in TestKind::ALL {
            assert_eq!(t.label().parse::<TestKind>().unwrap(), t);
        }
        assert_eq!("Gr*".parse::<TestKind>().unwrap(), TestKind::Greenwood);
        assert!("foo".parse::<TestKind>().is_err());
    }

    proptest! {
        #[test]
        fn affine_invariance(
            raw in prop::collection::vec(0.1f64..100.0, 30..80),
            a in 0.05f64..20.0,
            b in -50.0f64..50.0,
        ) {
            let s = sample(&raw);
            let k = s.len() / 3;
            let moved = s.affine(a, b).unwrap();
            for test in [TestKind::GStar, TestKind::Ratio, TestKind::Greenwood] {
                if let (Ok(x), Ok(y)) = (test.run(&s, k), test.run(&moved, k)) {
                    prop_assert!((x.normalized - y.normalized).abs() <= 1e-7 * (1.0 + x.normalized.abs()));
                }
            }
            let scaled = s.affine(a, 0.0).unwrap();
            if let (Ok(x), Ok(y)) = (t1_star(&s, k), t1_star(&scaled, k)) {
                prop_assert!((x.normalized - y.normalized).abs() <= 1e-7 * (1.0 + x.normalized.abs()));
            }
        }
    }
}
