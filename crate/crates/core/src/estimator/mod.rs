//! Dose-response estimators built on isotonic regression of pseudo-outcomes.
//!
//! Every variant reduces to the same final step: a cumulative-sum diagram
//! over a domain coordinate (the empirical CDF of the exposure, or the raw
//! exposure for the no-transform variant), its greatest convex minorant, and
//! the left derivative of that minorant.

mod crossfit;
mod discrete;
mod no_transform;
mod pseudo;
mod split;
mod standard;

use serde::{Deserialize, Serialize};

pub use crossfit::{
    fit_cross_fitted, fit_cross_fitted_with, CrossFit, CrossFitOptions, FixedNuisance, FoldAssignment, MuBarAveraging,
    NuisanceLearner, NuisancePair,
};
pub use discrete::{aipw_levels, fit_discrete, AipwLevels};
pub use no_transform::fit_no_transform;
pub use pseudo::{primitive_gamma, pseudo_outcomes, PseudoOutcomes};
pub use split::{fit_sample_split, SplitFit};
pub use standard::{fit_causal_isotonic, fit_from_pseudo};

use crate::error::{Error, Result};
use crate::isotonic::{Continuity, ConvexMinorant, StepFunction};
use crate::nuisance::RankTransform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Standard,
    CrossFitted,
    NoTransform,
    Discrete,
}

/// A fitted monotone curve together with everything inference needs.
///
/// `support` holds the distinct sample exposures in increasing order,
/// `coords` the matching domain coordinates (`F_n` at each support point,
/// or the exposure itself for [`Variant::NoTransform`]), `gamma` the
/// cumulative primitive there and `levels` the fitted curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseResponseFit {
    pub variant: Variant,
    pub support: Vec<f64>,
    pub coords: Vec<f64>,
    pub gamma: Vec<f64>,
    pub levels: Vec<f64>,
    pub minorant: ConvexMinorant,
    /// Per-observation exposures, aligned with `pseudo`.
    pub exposures: Vec<f64>,
    pub pseudo: PseudoOutcomes,
    pub ranks: RankTransform,
    pub restriction: Option<(f64, f64)>,
}

impl DoseResponseFit {
    pub fn n(&self) -> usize {
        self.exposures.len()
    }

    /// `F_n(a)` over the (possibly restricted) sample.
    pub fn rank_of(&self, a: f64) -> f64 {
        self.ranks.cdf(a)
    }

    /// `theta_n(a)`. For rank-based variants this is `psi_n(F_n(a))`, a
    /// right-continuous step in `a` that is undefined below the smallest
    /// exposure. The no-transform curve is the left derivative on
    /// `(a_-, a_+]`, extended flat past the last support point.
    pub fn evaluate(&self, a: f64) -> Result<f64> {
        if !a.is_finite() {
            return Err(Error::NonFinite("evaluation point".into()));
        }
        match self.variant {
            Variant::NoTransform => {
                let (lo, _) = self.minorant.domain();
                if a <= lo {
                    return Err(Error::OutOfDomain {
                        t: a,
                        lo,
                        hi: *self.support.last().unwrap(),
                    });
                }
                let k = self.support.partition_point(|&s| s < a);
                Ok(self.levels[k.min(self.levels.len() - 1)])
            }
            _ => {
                let k = self.support.partition_point(|&s| s <= a);
                if k == 0 {
                    return Err(Error::OutOfDomain {
                        t: a,
                        lo: self.support[0],
                        hi: *self.support.last().unwrap(),
                    });
                }
                Ok(self.levels[k - 1])
            }
        }
    }

    /// The fitted curve on the exposure scale.
    pub fn theta(&self) -> StepFunction {
        let continuity = match self.variant {
            Variant::NoTransform => Continuity::Left,
            _ => Continuity::Right,
        };
        StepFunction::new(self.support.clone(), self.levels.clone(), continuity)
            .expect("support is strictly increasing")
    }

    /// `Gamma_n` at the support points, zero below the first.
    pub fn gamma_step(&self) -> StepFunction {
        StepFunction::new(self.support.clone(), self.gamma.clone(), Continuity::Right)
            .expect("support is strictly increasing")
            .with_value_below(0.0)
    }

    /// `psi_n` on the domain coordinate: the left derivative of the minorant.
    pub fn psi(&self) -> StepFunction {
        self.minorant.left_derivative_step()
    }

    /// `theta_n(A_i)` for every observation, in observation order.
    pub fn fitted_at_observations(&self) -> Vec<f64> {
        self.exposures
            .iter()
            .map(|&a| {
                let k = self.support.partition_point(|&s| s < a);
                self.levels[k]
            })
            .collect()
    }
}
