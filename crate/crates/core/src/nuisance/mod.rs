//! Outcome regressions `mu(a, w)` and normalized exposure-density ratios
//! `g(a, w) = pi(a | w) / f(a)`.
//!
//! Estimators only see the two traits below. Concrete parametric models
//! (logistic or linear outcome regressions, the linear-in-rank conditional
//! density of the simulation design) live in the submodules, together with
//! rank wrappers that make a fitted model depend on the exposure only
//! through its empirical CDF.

mod clamp;
mod density;
mod exposure;
mod linear;
mod logistic;
mod rank;
mod spec;

pub use clamp::{clamp_ratio, ClampedRatio};
pub use density::{fit_linear_slope_density, slope_density, LinearSlopeDensity};
pub use exposure::{fit_gaussian_exposure, fit_level_probabilities, GaussianExposureDensity, LevelProbabilityModel};
pub use linear::{fit_linear, LinearFit};
pub use logistic::{expit, fit_logistic, logit, LogisticFit};
pub use rank::{rank_wrap_outcome, RankTransform, RankWrapped};
pub use spec::{
    BaseOutcome, ExposureScale, FittedNuisance, FittedOutcome, FittedRatio, NuisanceSpec, OutcomeFeatures, OutcomeSpec,
    RatioKind, RatioSpec, DEFAULT_RATIO_CLAMP,
};

/// Outcome regression `mu(a, w) = E[Y | A = a, W = w]`.
pub trait OutcomeModel: Send + Sync {
    fn predict(&self, a: f64, w: &[f64]) -> f64;
}

/// Normalized exposure density `g(a, w)`.
pub trait DensityRatioModel: Send + Sync {
    fn ratio(&self, a: f64, w: &[f64]) -> f64;

    /// Conditional density `pi(a | w)`, when the model provides one.
    fn conditional_density(&self, _a: f64, _w: &[f64]) -> Option<f64> {
        None
    }

    /// Marginal density `f(a)`, when the model provides one.
    fn marginal_density(&self, _a: f64) -> Option<f64> {
        None
    }
}

/// Conditional exposure density `pi(a | w)` on the original exposure scale.
pub trait ConditionalDensity: Send + Sync {
    fn density(&self, a: f64, w: &[f64]) -> f64;
}

/// Conditional probabilities `pi(a_j | w)` over a finite exposure support.
pub trait LevelProbabilities: Send + Sync {
    /// Probability of the level with index `j` (levels sorted ascending).
    fn probability(&self, j: usize, w: &[f64]) -> f64;
}

impl<M: OutcomeModel + ?Sized> OutcomeModel for &M {
    fn predict(&self, a: f64, w: &[f64]) -> f64 {
        (**self).predict(a, w)
    }
}

impl<M: OutcomeModel + ?Sized> OutcomeModel for std::sync::Arc<M> {
    fn predict(&self, a: f64, w: &[f64]) -> f64 {
        (**self).predict(a, w)
    }
}

impl<M: DensityRatioModel + ?Sized> DensityRatioModel for &M {
    fn ratio(&self, a: f64, w: &[f64]) -> f64 {
        (**self).ratio(a, w)
    }
    fn conditional_density(&self, a: f64, w: &[f64]) -> Option<f64> {
        (**self).conditional_density(a, w)
    }
    fn marginal_density(&self, a: f64) -> Option<f64> {
        (**self).marginal_density(a)
    }
}

impl<M: DensityRatioModel + ?Sized> DensityRatioModel for std::sync::Arc<M> {
    fn ratio(&self, a: f64, w: &[f64]) -> f64 {
        (**self).ratio(a, w)
    }
    fn conditional_density(&self, a: f64, w: &[f64]) -> Option<f64> {
        (**self).conditional_density(a, w)
    }
    fn marginal_density(&self, a: f64) -> Option<f64> {
        (**self).marginal_density(a)
    }
}

/// Adapts a closure `(a, w) -> mu` into an [`OutcomeModel`].
#[derive(Clone, Copy)]
pub struct OutcomeFn<F>(pub F);

impl<F: Fn(f64, &[f64]) -> f64 + Send + Sync> OutcomeModel for OutcomeFn<F> {
    fn predict(&self, a: f64, w: &[f64]) -> f64 {
        (self.0)(a, w)
    }
}

/// Adapts a closure `(a, w) -> g` into a [`DensityRatioModel`].
#[derive(Clone, Copy)]
pub struct RatioFn<F>(pub F);

impl<F: Fn(f64, &[f64]) -> f64 + Send + Sync> DensityRatioModel for RatioFn<F> {
    fn ratio(&self, a: f64, w: &[f64]) -> f64 {
        (self.0)(a, w)
    }
}

/// Adapts a closure `(a, w) -> pi(a | w)` into a [`ConditionalDensity`].
#[derive(Clone, Copy)]
pub struct DensityFn<F>(pub F);

impl<F: Fn(f64, &[f64]) -> f64 + Send + Sync> ConditionalDensity for DensityFn<F> {
    fn density(&self, a: f64, w: &[f64]) -> f64 {
        (self.0)(a, w)
    }
}

/// Adapts a closure `(j, w) -> pi(a_j | w)` into [`LevelProbabilities`].
#[derive(Clone, Copy)]
pub struct LevelFn<F>(pub F);

impl<F: Fn(usize, &[f64]) -> f64 + Send + Sync> LevelProbabilities for LevelFn<F> {
    fn probability(&self, j: usize, w: &[f64]) -> f64 {
        (self.0)(j, w)
    }
}

/// `g = 1`: exposure independent of covariates.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitRatio;

impl DensityRatioModel for UnitRatio {
    fn ratio(&self, _a: f64, _w: &[f64]) -> f64 {
        1.0
    }
}

/// Row-major design matrix helper shared by the parametric fits.
#[derive(Debug, Clone)]
pub struct Design {
    values: Vec<f64>,
    ncols: usize,
}

impl Design {
    pub fn new(values: Vec<f64>, ncols: usize) -> Self {
        assert!(ncols > 0 && values.len().is_multiple_of(ncols), "ragged design");
        Self { values, ncols }
    }

    pub fn from_rows<I, R>(rows: I, ncols: usize) -> Self
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[f64]>,
    {
        let mut values = Vec::new();
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), ncols, "ragged design");
            values.extend_from_slice(r);
        }
        Self::new(values, ncols)
    }

    pub fn nrows(&self) -> usize {
        self.values.len() / self.ncols
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.ncols..(i + 1) * self.ncols]
    }
}

pub(crate) fn dot(x: &[f64], beta: &[f64]) -> f64 {
    x.iter().zip(beta).map(|(a, b)| a * b).sum()
}
