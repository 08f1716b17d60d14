//! Pointwise confidence intervals for the fitted curve.
//!
//! Wald intervals use `n^{1/3}` asymptotics with Chernoff quantiles and a
//! scale `tau_n(a) = psi_n'(F_n(a)) kappa_n(a)`, where `kappa_n` is either
//! the plug-in or the doubly-robust estimator.

mod chernoff;
mod derivative;
mod kappa;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

pub use chernoff::{
    chernoff_quantile, regenerate_table, simulate_chernoff, ChernoffTable, RegenerationConfig, MIN_REGENERATION_PATHS,
};
pub use derivative::{default_psi_bandwidth, estimate_psi_prime, local_quadratic_derivative, PsiPrime};
pub use kappa::{
    default_kappa_grid, dr_eta, fit_variance_model, kappa_dr, kappa_plugin, kappa_plugin_cross_fitted, KappaDr,
    VarianceModel,
};

use crate::error::{Error, Result};
use crate::estimator::{DoseResponseFit, SplitFit};

pub const DEFAULT_EFFECT_DRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMethod {
    Plugin,
    DoublyRobust,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    Plugin,
    DoublyRobust,
    Split,
}

impl From<ScaleMethod> for IntervalMethod {
    fn from(m: ScaleMethod) -> Self {
        match m {
            ScaleMethod::Plugin => IntervalMethod::Plugin,
            ScaleMethod::DoublyRobust => IntervalMethod::DoublyRobust,
        }
    }
}

/// `tau_n(a) = psi_n'(F_n(a)) kappa_n(a)` with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleEstimate {
    pub a: f64,
    pub psi_prime: f64,
    /// The derivative estimate was negative and set to zero.
    pub psi_prime_floored: bool,
    pub kappa: f64,
    pub tau: f64,
    pub method: ScaleMethod,
    /// Bandwidth selected for the doubly-robust scale.
    pub bandwidth: Option<f64>,
}

impl ScaleEstimate {
    /// Combines a scale `kappa` with the derivative of `psi_n` at `F_n(a)`.
    pub fn new(
        fit: &DoseResponseFit,
        a: f64,
        kappa: f64,
        method: ScaleMethod,
        bandwidth: Option<f64>,
        psi_bandwidth: Option<f64>,
    ) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::NonFinite(format!("scale kappa = {kappa}")));
        }
        let d = estimate_psi_prime(fit, a, psi_bandwidth)?;
        Ok(Self {
            a,
            psi_prime: d.value,
            psi_prime_floored: d.floored,
            kappa,
            tau: d.value * kappa,
            method,
            bandwidth,
        })
    }

    /// Doubly-robust scale at `a` with the default bandwidth grids.
    pub fn doubly_robust(fit: &DoseResponseFit, a: f64) -> Result<Self> {
        let k = kappa_dr(fit, a, None)?;
        Self::new(fit, a, k.value, ScaleMethod::DoublyRobust, Some(k.bandwidth), None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub a: f64,
    /// Second point for an effect `theta(a) - theta(a2)`.
    pub a2: Option<f64>,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub method: IntervalMethod,
    pub note: Option<String>,
}

impl ConfidenceInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// `theta_n(a) -/+ (4 tau_n(a) / n)^{1/3} q_{1 - alpha/2}`.
pub fn wald_ci(fit: &DoseResponseFit, a: f64, alpha: f64, scale: &ScaleEstimate) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    if !(scale.tau >= 0.0 && scale.tau.is_finite()) {
        return Err(Error::InvalidInput(format!("scale tau = {}", scale.tau)));
    }
    let estimate = fit.evaluate(a)?;
    let q = chernoff_quantile(1.0 - alpha / 2.0)?;
    let half = (4.0 * scale.tau / fit.n() as f64).cbrt() * q;
    Ok(ConfidenceInterval {
        a,
        a2: None,
        estimate,
        lower: estimate - half,
        upper: estimate + half,
        alpha,
        method: scale.method.into(),
        note: scale
            .psi_prime_floored
            .then(|| "derivative estimate floored at zero".to_string()),
    })
}

/// `p`-quantile of `c1 W1 - c2 W2` for independent Chernoff variables, from
/// `draws` seeded inverse-CDF pairs. Each pair enters as the four values
/// `+-(c1 X - c2 Y)` and `+-(c1 Y - c2 X)`, so the sample is symmetric and
/// invariant to exchanging `c1` and `c2`.
pub fn difference_quantile(c1: f64, c2: f64, p: f64, draws: usize, seed: u64) -> Result<f64> {
    if draws == 0 {
        return Err(Error::InvalidInput("need at least one draw".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!("probability {p} outside (0, 1)")));
    }
    let table = ChernoffTable::embedded();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Vec::with_capacity(4 * draws);
    for _ in 0..draws {
        let x = table.sample(&mut rng);
        let y = table.sample(&mut rng);
        let d1 = c1 * x - c2 * y;
        let d2 = c1 * y - c2 * x;
        v.extend_from_slice(&[d1, -d1, d2, -d2]);
    }
    v.sort_by(f64::total_cmp);
    Ok(chernoff::sorted_quantile(&v, p))
}

/// Interval for `theta_0(a1) - theta_0(a2)` from independent Chernoff limits
/// at the two points.
#[allow(clippy::too_many_arguments)]
pub fn effect_ci(
    fit: &DoseResponseFit,
    a1: f64,
    a2: f64,
    alpha: f64,
    s1: &ScaleEstimate,
    s2: &ScaleEstimate,
    draws: usize,
    seed: u64,
) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    let estimate = fit.evaluate(a1)? - fit.evaluate(a2)?;
    let c1 = (4.0 * s1.tau).cbrt();
    let c2 = (4.0 * s2.tau).cbrt();
    let q = difference_quantile(c1, c2, 1.0 - alpha / 2.0, draws, seed)?;
    let half = q / (fit.n() as f64).cbrt();
    Ok(ConfidenceInterval {
        a: a1,
        a2: Some(a2),
        estimate,
        lower: estimate - half,
        upper: estimate + half,
        alpha,
        method: s1.method.into(),
        note: (a1 == a2).then(|| "a1 equals a2".to_string()),
    })
}

/// `theta_bar(a) -/+ sigma(a) t_{1 - alpha/2, m - 1} / (sqrt(m) n^{1/3})`
/// with `sigma` the across-split standard deviation and `n` the full sample size.
pub fn split_ci(split: &SplitFit, a: f64, alpha: f64) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    let values = split.values(a)?;
    let m = values.len();
    if m < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: m });
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (m - 1) as f64)
        .map_err(|e| Error::InvalidInput(e.to_string()))?
        .inverse_cdf(1.0 - alpha / 2.0);
    let half = var.sqrt() * t / ((m as f64).sqrt() * (split.n as f64).cbrt());
    Ok(ConfidenceInterval {
        a,
        a2: None,
        estimate: mean,
        lower: mean - half,
        upper: mean + half,
        alpha,
        method: IntervalMethod::Split,
        note: None,
    })
}
