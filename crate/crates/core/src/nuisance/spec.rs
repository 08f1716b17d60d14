//! Declarative nuisance configurations and their serializable fitted forms.

use serde::{Deserialize, Serialize};

use super::density::slope_lambda;
use super::{
    fit_linear, fit_linear_slope_density, fit_logistic, slope_density, DensityRatioModel, Design, OutcomeModel,
    RankTransform,
};
use crate::data::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_RATIO_CLAMP: (f64, f64) = (0.05, 20.0);

/// Which regressors enter an outcome regression:
/// `(1, w_S, a, a * w_S if interactions, a^2 if quadratic)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeFeatures {
    pub covariates: Vec<usize>,
    pub interactions: bool,
    pub quadratic: bool,
}

impl OutcomeFeatures {
    /// All `p` covariates, interactions with the exposure and a quadratic term.
    pub fn full(p: usize) -> Self {
        Self {
            covariates: (0..p).collect(),
            interactions: true,
            quadratic: true,
        }
    }

    pub fn width(&self) -> usize {
        let s = self.covariates.len();
        2 + s + if self.interactions { s } else { 0 } + usize::from(self.quadratic)
    }

    pub fn row(&self, a: f64, w: &[f64]) -> Vec<f64> {
        let mut r = Vec::with_capacity(self.width());
        r.push(1.0);
        r.extend(self.covariates.iter().map(|&j| w[j]));
        r.push(a);
        if self.interactions {
            r.extend(self.covariates.iter().map(|&j| a * w[j]));
        }
        if self.quadratic {
            r.push(a * a);
        }
        r
    }

    /// `x(a, w)' beta` without allocating.
    pub fn index(&self, a: f64, w: &[f64], beta: &[f64]) -> f64 {
        let s = self.covariates.len();
        let mut acc = beta[0];
        for (k, &j) in self.covariates.iter().enumerate() {
            acc += beta[1 + k] * w[j];
        }
        acc += beta[1 + s] * a;
        let mut next = 2 + s;
        if self.interactions {
            for (k, &j) in self.covariates.iter().enumerate() {
                acc += beta[next + k] * a * w[j];
            }
            next += s;
        }
        if self.quadratic {
            acc += beta[next] * a * a;
        }
        acc
    }
}

/// Exposure scale an outcome regression is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExposureScale {
    Raw,
    /// Fit on `U = F_n(A)` and evaluate through the empirical CDF.
    #[default]
    Rank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutcomeSpec {
    /// `mu(a, w) = mean(Y)`.
    Constant,
    Logistic {
        features: OutcomeFeatures,
        #[serde(default)]
        scale: ExposureScale,
        #[serde(default)]
        ridge: f64,
    },
    Linear {
        features: OutcomeFeatures,
        #[serde(default)]
        scale: ExposureScale,
        #[serde(default)]
        ridge: f64,
        /// Predictions are truncated to `[-bound, bound]`.
        #[serde(default)]
        bound: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RatioSpec {
    /// `g = 1`.
    Uniform,
    /// Linear-in-rank conditional density of `U = F_n(A)` given `W`.
    LinearSlope {
        covariates: Vec<usize>,
        #[serde(default = "default_true")]
        intercept: bool,
    },
}

fn default_true() -> bool {
    true
}

fn default_clamp() -> (f64, f64) {
    DEFAULT_RATIO_CLAMP
}

/// How to build `(mu_n, g_n)` from a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceSpec {
    pub outcome: OutcomeSpec,
    pub ratio: RatioSpec,
    #[serde(default = "default_clamp")]
    pub clamp: (f64, f64),
}

impl NuisanceSpec {
    pub fn new(outcome: OutcomeSpec, ratio: RatioSpec) -> Self {
        Self {
            outcome,
            ratio,
            clamp: DEFAULT_RATIO_CLAMP,
        }
    }

    pub fn fit(&self, data: &Dataset) -> Result<FittedNuisance> {
        let (lo, hi) = self.clamp;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid ratio clamp [{lo}, {hi}]")));
        }
        Ok(FittedNuisance {
            outcome: fit_outcome(&self.outcome, data)?,
            ratio: fit_ratio(&self.ratio, data, lo, hi)?,
        })
    }
}

impl OutcomeSpec {
    pub fn fit(&self, data: &Dataset) -> Result<FittedOutcome> {
        fit_outcome(self, data)
    }
}

fn check_indices(data: &Dataset, idx: &[usize]) -> Result<()> {
    match idx.iter().find(|&&j| j >= data.n_covariates()) {
        Some(j) => Err(Error::InvalidInput(format!(
            "covariate index {j} out of range (p = {})",
            data.n_covariates()
        ))),
        None => Ok(()),
    }
}

fn fit_outcome(spec: &OutcomeSpec, data: &Dataset) -> Result<FittedOutcome> {
    let scaled = |scale: ExposureScale| -> Result<(Vec<f64>, Option<RankTransform>)> {
        match scale {
            ExposureScale::Raw => Ok((data.a().to_vec(), None)),
            ExposureScale::Rank => {
                let rt = RankTransform::new(data.a())?;
                Ok((data.a().iter().map(|&a| rt.cdf(a)).collect(), Some(rt)))
            }
        }
    };
    let design = |features: &OutcomeFeatures, a: &[f64]| {
        Design::from_rows((0..data.len()).map(|i| features.row(a[i], data.w(i))), features.width())
    };
    match spec {
        OutcomeSpec::Constant => {
            let mean = data.y().iter().sum::<f64>() / data.len() as f64;
            Ok(FittedOutcome {
                base: BaseOutcome::Constant { value: mean },
                ranks: None,
            })
        }
        OutcomeSpec::Logistic { features, scale, ridge } => {
            check_indices(data, &features.covariates)?;
            let (a, ranks) = scaled(*scale)?;
            let fit = fit_logistic(&design(features, &a), data.y(), *ridge)?;
            Ok(FittedOutcome {
                base: BaseOutcome::Logistic {
                    features: features.clone(),
                    coef: fit.coef,
                },
                ranks,
            })
        }
        OutcomeSpec::Linear {
            features,
            scale,
            ridge,
            bound,
        } => {
            check_indices(data, &features.covariates)?;
            let (a, ranks) = scaled(*scale)?;
            let fit = fit_linear(&design(features, &a), data.y(), *ridge)?;
            Ok(FittedOutcome {
                base: BaseOutcome::Linear {
                    features: features.clone(),
                    coef: fit.coef,
                    bound: *bound,
                },
                ranks,
            })
        }
    }
}

fn fit_ratio(spec: &RatioSpec, data: &Dataset, lo: f64, hi: f64) -> Result<FittedRatio> {
    let kind = match spec {
        RatioSpec::Uniform => RatioKind::Uniform,
        RatioSpec::LinearSlope { covariates, intercept } => {
            check_indices(data, covariates)?;
            if covariates.is_empty() && !intercept {
                RatioKind::Uniform
            } else {
                let ranks = RankTransform::new(data.a())?;
                let u: Vec<f64> = data.a().iter().map(|&a| ranks.cdf(a)).collect();
                let width = covariates.len() + usize::from(*intercept);
                let design = Design::from_rows(
                    (0..data.len()).map(|i| slope_index_row(data.w(i), covariates, *intercept)),
                    width,
                );
                let fit = fit_linear_slope_density(&u, &design)?;
                RatioKind::LinearSlope {
                    covariates: covariates.clone(),
                    intercept: *intercept,
                    coef: fit.coef,
                    ranks,
                }
            }
        }
    };
    Ok(FittedRatio { kind, lo, hi })
}

fn slope_index_row(w: &[f64], covariates: &[usize], intercept: bool) -> Vec<f64> {
    let mut r = Vec::with_capacity(covariates.len() + 1);
    if intercept {
        r.push(1.0);
    }
    r.extend(covariates.iter().map(|&j| w[j]));
    r
}

/// A fitted outcome regression on whichever exposure scale it was trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseOutcome {
    Constant {
        value: f64,
    },
    Logistic {
        features: OutcomeFeatures,
        coef: Vec<f64>,
    },
    Linear {
        features: OutcomeFeatures,
        coef: Vec<f64>,
        bound: Option<f64>,
    },
}

impl OutcomeModel for BaseOutcome {
    fn predict(&self, a: f64, w: &[f64]) -> f64 {
        match self {
            BaseOutcome::Constant { value } => *value,
            BaseOutcome::Logistic { features, coef } => super::expit(features.index(a, w, coef)),
            BaseOutcome::Linear { features, coef, bound } => {
                let v = features.index(a, w, coef);
                match bound {
                    Some(b) => v.clamp(-b, *b),
                    None => v,
                }
            }
        }
    }
}

/// Outcome regression plus, for rank-scale fits, the empirical CDF of the
/// training exposures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedOutcome {
    pub base: BaseOutcome,
    pub ranks: Option<RankTransform>,
}

impl OutcomeModel for FittedOutcome {
    fn predict(&self, a: f64, w: &[f64]) -> f64 {
        match &self.ranks {
            Some(rt) => self.base.predict(rt.cdf(a), w),
            None => self.base.predict(a, w),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RatioKind {
    Uniform,
    LinearSlope {
        covariates: Vec<usize>,
        intercept: bool,
        coef: Vec<f64>,
        ranks: RankTransform,
    },
}

/// Fitted density ratio, truncated to `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedRatio {
    pub kind: RatioKind,
    pub lo: f64,
    pub hi: f64,
}

impl DensityRatioModel for FittedRatio {
    fn ratio(&self, a: f64, w: &[f64]) -> f64 {
        let g = match &self.kind {
            RatioKind::Uniform => 1.0,
            RatioKind::LinearSlope {
                covariates,
                intercept,
                coef,
                ranks,
            } => {
                let mut idx = if *intercept { coef[0] } else { 0.0 };
                let off = usize::from(*intercept);
                for (k, &j) in covariates.iter().enumerate() {
                    idx += coef[off + k] * w[j];
                }
                slope_density(ranks.cdf(a), slope_lambda(idx))
            }
        };
        g.clamp(self.lo, self.hi)
    }
}

/// Fitted `(mu_n, g_n)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedNuisance {
    pub outcome: FittedOutcome,
    pub ratio: FittedRatio,
}
