use std::sync::atomic::{AtomicU64, Ordering};

use super::DensityRatioModel;
use crate::error::{Error, Result};

/// A density-ratio model whose evaluations are truncated to `[lo, hi]`.
///
/// Counts evaluations and truncations for diagnostics.
#[derive(Debug)]
pub struct ClampedRatio<M> {
    inner: M,
    lo: f64,
    hi: f64,
    evaluations: AtomicU64,
    truncated: AtomicU64,
}

pub fn clamp_ratio<M: DensityRatioModel>(model: M, lo: f64, hi: f64) -> Result<ClampedRatio<M>> {
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "clamp bounds must satisfy 0 < lo < hi < inf, got [{lo}, {hi}]"
        )));
    }
    Ok(ClampedRatio {
        inner: model,
        lo,
        hi,
        evaluations: AtomicU64::new(0),
        truncated: AtomicU64::new(0),
    })
}

impl<M> ClampedRatio<M> {
    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn truncations(&self) -> u64 {
        self.truncated.load(Ordering::Relaxed)
    }

    /// Fraction of evaluations so far that hit a bound.
    pub fn truncation_rate(&self) -> f64 {
        let e = self.evaluations();
        if e == 0 {
            0.0
        } else {
            self.truncations() as f64 / e as f64
        }
    }
}

impl<M: DensityRatioModel> DensityRatioModel for ClampedRatio<M> {
    fn ratio(&self, a: f64, w: &[f64]) -> f64 {
        let g = self.inner.ratio(a, w);
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        if g < self.lo || g > self.hi || g.is_nan() {
            self.truncated.fetch_add(1, Ordering::Relaxed);
        }
        if g.is_nan() {
            return g;
        }
        g.clamp(self.lo, self.hi)
    }

    fn conditional_density(&self, a: f64, w: &[f64]) -> Option<f64> {
        self.inner.conditional_density(a, w)
    }

    fn marginal_density(&self, a: f64) -> Option<f64> {
        self.inner.marginal_density(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nuisance::RatioFn;
    use proptest::prelude::*;

    #[test]
    fn unit_model_untouched() {
        let m = clamp_ratio(RatioFn(|_: f64, _: &[f64]| 1.0), 0.1, 10.0).unwrap();
        assert_eq!(m.ratio(0.3, &[]), 1.0);
        assert_eq!(m.truncations(), 0);
    }

    #[test]
    fn small_model_truncated_everywhere() {
        let m = clamp_ratio(RatioFn(|_: f64, _: &[f64]| 0.01), 0.1, 10.0).unwrap();
        for a in [0.0, 1.0, 2.0, 3.0] {
            assert_eq!(m.ratio(a, &[]), 0.1);
        }
        assert_eq!(m.truncation_rate(), 1.0);
    }

    #[test]
    fn invalid_bounds() {
        assert!(clamp_ratio(RatioFn(|_: f64, _: &[f64]| 1.0), 2.0, 1.0).is_err());
        assert!(clamp_ratio(RatioFn(|_: f64, _: &[f64]| 1.0), 0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn outputs_within_bounds(scale in -8.0f64..8.0, a in -5.0f64..5.0, w in -5.0f64..5.0) {
            let m = clamp_ratio(RatioFn(move |a: f64, w: &[f64]| (scale * a * w[0]).exp()), 0.05, 20.0).unwrap();
            let g = m.ratio(a, &[w]);
            prop_assert!((0.05..=20.0).contains(&g));
        }
    }
}
