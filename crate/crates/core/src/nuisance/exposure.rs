//! Exposure models on the original scale: a Gaussian linear model for
//! `pi(a | w)` and normalized one-vs-rest logistic models for discrete
//! exposure levels.

use serde::{Deserialize, Serialize};

use super::{fit_linear, fit_logistic, ConditionalDensity, Design, LevelProbabilities};
use crate::data::Dataset;
use crate::error::{Error, Result};

fn index_row(w: &[f64], covariates: &[usize]) -> Vec<f64> {
    std::iter::once(1.0).chain(covariates.iter().map(|&j| w[j])).collect()
}

/// `A | W = w ~ N(x(w)' beta, sigma^2)` with `x(w) = (1, w_S)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianExposureDensity {
    pub covariates: Vec<usize>,
    pub coef: Vec<f64>,
    pub sigma: f64,
}

pub fn fit_gaussian_exposure(data: &Dataset, covariates: &[usize]) -> Result<GaussianExposureDensity> {
    check_covariates(data, covariates)?;
    let design = Design::from_rows(
        (0..data.len()).map(|i| index_row(data.w(i), covariates)),
        covariates.len() + 1,
    );
    let fit = fit_linear(&design, data.a(), 0.0)?;
    if fit.sigma2 <= 0.0 {
        return Err(Error::Degenerate(
            "exposure is a deterministic function of covariates".into(),
        ));
    }
    Ok(GaussianExposureDensity {
        covariates: covariates.to_vec(),
        coef: fit.coef,
        sigma: fit.sigma2.sqrt(),
    })
}

impl ConditionalDensity for GaussianExposureDensity {
    fn density(&self, a: f64, w: &[f64]) -> f64 {
        let mean: f64 = index_row(w, &self.covariates)
            .iter()
            .zip(&self.coef)
            .map(|(x, b)| x * b)
            .sum();
        let z = (a - mean) / self.sigma;
        (-0.5 * z * z).exp() / (self.sigma * (2.0 * std::f64::consts::PI).sqrt())
    }
}

/// Probabilities of each discrete exposure level from one-vs-rest logistic
/// regressions, renormalized to sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelProbabilityModel {
    pub levels: Vec<f64>,
    pub covariates: Vec<usize>,
    pub coef: Vec<Vec<f64>>,
}

pub fn fit_level_probabilities(
    data: &Dataset,
    levels: &[f64],
    covariates: &[usize],
    ridge: f64,
) -> Result<LevelProbabilityModel> {
    check_covariates(data, covariates)?;
    let design = Design::from_rows(
        (0..data.len()).map(|i| index_row(data.w(i), covariates)),
        covariates.len() + 1,
    );
    let coef = levels
        .iter()
        .map(|&lvl| {
            let y: Vec<f64> = data.a().iter().map(|&a| f64::from(a == lvl)).collect();
            fit_logistic(&design, &y, ridge).map(|f| f.coef)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LevelProbabilityModel {
        levels: levels.to_vec(),
        covariates: covariates.to_vec(),
        coef,
    })
}

impl LevelProbabilities for LevelProbabilityModel {
    fn probability(&self, j: usize, w: &[f64]) -> f64 {
        let x = index_row(w, &self.covariates);
        let raw: Vec<f64> = self.coef.iter().map(|b| super::expit(super::dot(&x, b))).collect();
        raw[j] / raw.iter().sum::<f64>()
    }
}

fn check_covariates(data: &Dataset, covariates: &[usize]) -> Result<()> {
    match covariates.iter().find(|&&j| j >= data.n_covariates()) {
        Some(j) => Err(Error::InvalidInput(format!(
            "covariate index {j} out of range (p = {})",
            data.n_covariates()
        ))),
        None => Ok(()),
    }
}
