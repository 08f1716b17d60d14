use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::isotonic::{Continuity, StepFunction};
use crate::nuisance::{DensityRatioModel, OutcomeModel};

/// Per-observation pseudo-outcome ingredients.
///
/// `xi_i = residual_i + mu_bar_i` where `residual_i = (Y_i - mu(A_i, W_i)) / g(A_i, W_i)`
/// and `mu_bar_i` averages `mu(A_i, .)` over the covariate sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoOutcomes {
    pub xi: Vec<f64>,
    pub residual: Vec<f64>,
    pub mu_bar: Vec<f64>,
}

impl PseudoOutcomes {
    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub(crate) fn subset(&self, idx: &[usize]) -> Self {
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect();
        Self {
            xi: pick(&self.xi),
            residual: pick(&self.residual),
            mu_bar: pick(&self.mu_bar),
        }
    }
}

/// `(1/|S|) sum_{j in S} mu(a, W_j)`.
pub(crate) fn average_over<M: OutcomeModel + ?Sized>(
    mu: &M,
    a: f64,
    data: &Dataset,
    rows: impl Iterator<Item = usize>,
) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for j in rows {
        sum += mu.predict(a, data.w(j));
        count += 1;
    }
    sum / count as f64
}

pub(crate) fn residual<M, G>(mu: &M, g: &G, data: &Dataset, i: usize) -> Result<f64>
where
    M: OutcomeModel + ?Sized,
    G: DensityRatioModel + ?Sized,
{
    let (a, w) = (data.a()[i], data.w(i));
    let m = mu.predict(a, w);
    let r = g.ratio(a, w);
    if !m.is_finite() || !r.is_finite() {
        return Err(Error::NonFinite(format!("nuisance evaluation at observation {i}")));
    }
    if r <= 0.0 {
        return Err(Error::NonPositiveWeight(i));
    }
    Ok((data.y()[i] - m) / r)
}

/// Doubly-robust pseudo-outcomes with the full-sample covariate average.
/// Costs `n^2` outcome-model evaluations.
pub fn pseudo_outcomes<M, G>(data: &Dataset, mu: &M, g: &G) -> Result<PseudoOutcomes>
where
    M: OutcomeModel + ?Sized,
    G: DensityRatioModel + ?Sized,
{
    let n = data.len();
    let mut out = PseudoOutcomes {
        xi: Vec::with_capacity(n),
        residual: Vec::with_capacity(n),
        mu_bar: Vec::with_capacity(n),
    };
    for i in 0..n {
        let r = residual(mu, g, data, i)?;
        let m = average_over(mu, data.a()[i], data, 0..n);
        if !m.is_finite() {
            return Err(Error::NonFinite(format!("marginalized regression at observation {i}")));
        }
        out.residual.push(r);
        out.mu_bar.push(m);
        out.xi.push(r + m);
    }
    Ok(out)
}

/// `Gamma_n(a) = (1/n) sum_i I(A_i <= a) xi_i` at each distinct exposure,
/// as a right-continuous step function equal to zero below the smallest.
pub fn primitive_gamma(exposures: &[f64], xi: &[f64]) -> Result<StepFunction> {
    let cusum = cusum_by_exposure(exposures, xi)?;
    StepFunction::new(cusum.support, cusum.gamma, Continuity::Right).map(|s| s.with_value_below(0.0))
}

/// Cumulative sums of the pseudo-outcomes over the sorted distinct exposures.
pub(crate) struct Cusum {
    pub support: Vec<f64>,
    /// `#{i : A_i <= support_k}`
    pub counts: Vec<usize>,
    pub gamma: Vec<f64>,
}

pub(crate) fn cusum_by_exposure(exposures: &[f64], xi: &[f64]) -> Result<Cusum> {
    let n = exposures.len();
    if n == 0 {
        return Err(Error::EmptySample("cusum diagram".into()));
    }
    if xi.len() != n {
        return Err(Error::InvalidInput(format!(
            "{n} exposures but {} pseudo-outcomes",
            xi.len()
        )));
    }
    crate::error::ensure_finite(xi, "pseudo-outcome")?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| exposures[i].total_cmp(&exposures[j]));
    let mut support = Vec::new();
    let mut counts = Vec::new();
    let mut sums = Vec::new();
    let mut total = 0.0;
    for (seen, &i) in order.iter().enumerate() {
        total += xi[i];
        if support.last() == Some(&exposures[i]) {
            *counts.last_mut().unwrap() = seen + 1;
            *sums.last_mut().unwrap() = total;
        } else {
            support.push(exposures[i]);
            counts.push(seen + 1);
            sums.push(total);
        }
    }
    let gamma = sums.iter().map(|s| s / n as f64).collect();
    Ok(Cusum { support, counts, gamma })
}
