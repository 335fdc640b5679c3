//! Sorted samples and the excess moments computed over their upper tail.

use serde::Serialize;

use crate::error::{EvtError, Result};

/// Ascending order statistics X_{1,n} ≤ … ≤ X_{n,n} of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedSample {
    values: Vec<f64>,
}

/// Mean r-th powers of the top-k excesses over X_{n-k,n}, for r = 1, 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExcessMoments {
    pub k: usize,
    pub n1: f64,
    pub n2: f64,
    pub log_scale: bool,
}

impl SortedSample {
    /// Sorts a copy of `raw`. Rejects empty input and non-finite values.
    pub fn from_values(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(EvtError::Input("empty sample".into()));
        }
        if let Some(pos) = raw.iter().position(|v| !v.is_finite()) {
            return Err(EvtError::Input(format!(
                "non-finite value {} at position {pos}",
                raw[pos]
            )));
        }
        let mut values = raw.to_vec();
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub(crate) fn from_sorted_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Ascending values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// X_{n-i,n}, counting from the top: `i = 0` is the maximum.
    pub fn order_stat(&self, i: usize) -> Result<f64> {
        let n = self.values.len();
        if i >= n {
            return Err(EvtError::Index { index: i, n });
        }
        Ok(self.values[n - 1 - i])
    }

    /// Same as [`order_stat`](Self::order_stat) for callers that already checked the bound.
    #[inline]
    pub(crate) fn top(&self, i: usize) -> f64 {
        self.values[self.values.len() - 1 - i]
    }

    /// N_r = (1/k) Σ_{i<k} (x_{n-i,n} − x_{n-k,n})^r for r = 1, 2, with
    /// `x = log X` when `log_scale` is set.
    pub fn excess_moments(&self, k: usize, log_scale: bool) -> Result<ExcessMoments> {
        let n = self.len();
        if k == 0 || k >= n {
            return Err(EvtError::Input(format!(
                "excess moments need 1 <= k <= n-1, got k={k}, n={n}"
            )));
        }
        let transform = |x: f64| -> Result<f64> {
            if !log_scale {
                return Ok(x);
            }
            if x <= 0.0 {
                return Err(EvtError::Input(format!(
                    "log-scale moments need positive observations, found {x}"
                )));
            }
            Ok(x.ln())
        };
        let threshold = transform(self.top(k))?;
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for i in 0..k {
            let e = transform(self.top(i))? - threshold;
            s1 += e;
            s2 += e * e;
        }
        let kf = k as f64;
        Ok(ExcessMoments { k, n1: s1 / kf, n2: s2 / kf, log_scale })
    }

    /// The sample mapped through `x ↦ a·x + b` (a > 0 keeps the order).
    pub fn affine(&self, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(EvtError::Input(format!("affine map needs a > 0, got {a}")));
        }
        let values: Vec<f64> = self.values.iter().map(|&x| a * x + b).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EvtError::Input("affine map produced non-finite values".into()));
        }
        Ok(Self::from_sorted_unchecked(values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sorts_input() {
        let s = SortedSample::from_values(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
        let s = SortedSample::from_values(&[5.0]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.max(), 5.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SortedSample::from_values(&[]).is_err());
        assert!(SortedSample::from_values(&[1.0, f64::NAN]).is_err());
        assert!(SortedSample::from_values(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn order_stats_from_top() {
        let s = SortedSample::from_values(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.order_stat(0).unwrap(), 3.0);
        assert_eq!(s.order_stat(2).unwrap(), 1.0);
        assert!(matches!(s.order_stat(3), Err(EvtError::Index { index: 3, n: 3 })));
        let s = SortedSample::from_values(&[5.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.order_stat(1).unwrap(), 4.0);
    }

    #[test]
    fn excess_moments_hand_example() {
        let s = SortedSample::from_values(&[3.0, 4.0, 5.0]).unwrap();
        let m = s.excess_moments(2, false).unwrap();
        assert!((m.n1 - 1.5).abs() < 1e-15);
        assert!((m.n2 - 2.5).abs() < 1e-15);
    }

    #[test]
    fn excess_moments_constant_sample() {
        let s = SortedSample::from_values(&[7.0; 10]).unwrap();
        for k in 1..10 {
            let m = s.excess_moments(k, false).unwrap();
            assert_eq!((m.n1, m.n2), (0.0, 0.0));
        }
    }

    #[test]
    fn excess_moments_errors() {
        let s = SortedSample::from_values(&[-1.0, 2.0, 3.0]).unwrap();
        assert!(s.excess_moments(0, false).is_err());
        assert!(s.excess_moments(3, false).is_err());
        assert!(s.excess_moments(2, true).is_err());
        assert!(s.excess_moments(1, true).is_ok());
    }

    proptest! {
        #[test]
        fn moments_shift_invariant_scale_equivariant(
            raw in prop::collection::vec(-100.0f64..100.0, 3..60),
            shift in -1e3f64..1e3,
            scale in 0.01f64..50.0,
            kfrac in 0.0f64..1.0,
        ) {
            let s = SortedSample::from_values(&raw).unwrap();
            let k = 1 + ((s.len() - 2) as f64 * kfrac) as usize;
            let base = s.excess_moments(k, false).unwrap();
            let shifted = s.affine(1.0, shift).unwrap().excess_moments(k, false).unwrap();
            let scaled = s.affine(scale, 0.0).unwrap().excess_moments(k, false).unwrap();
            let tol = |x: f64| 1e-9 * (1.0 + x.abs());
            prop_assert!((shifted.n1 - base.n1).abs() <= tol(base.n1) * 1e3);
            prop_assert!((shifted.n2 - base.n2).abs() <= tol(base.n2) * 1e3);
            prop_assert!((scaled.n1 - scale * base.n1).abs() <= tol(scale * base.n1));
            prop_assert!((scaled.n2 - scale * scale * base.n2).abs() <= tol(scale * scale * base.n2));
            prop_assert!(base.n2 >= base.n1 * base.n1 * (1.0 - 1e-12));
        }
    }
}
