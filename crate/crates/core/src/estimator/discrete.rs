use super::pseudo::PseudoOutcomes;
use super::{DoseResponseFit, Variant};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::isotonic::{gcm, pava_weighted, PlanarPoints};
use crate::nuisance::{LevelProbabilities, OutcomeModel, RankTransform};

/// AIPW estimates at each exposure level with the level counts.
#[derive(Debug, Clone, PartialEq)]
pub struct AipwLevels {
    pub levels: Vec<f64>,
    pub counts: Vec<usize>,
    pub estimates: Vec<f64>,
    /// Level index of every observation.
    pub level_of: Vec<usize>,
    pub pseudo: PseudoOutcomes,
}

/// `theta_j = (1/n) sum_i { I(A_i = a_j) (Y_i - mu(a_j, W_i)) / pi(a_j | W_i) + mu(a_j, W_i) }`.
///
/// Also returns per-observation pseudo-outcomes whose level means equal
/// these estimates: the residual of observation `i` at level `j` is
/// scaled by `n_j / n`, which is the empirical marginal probability.
pub fn aipw_levels<M, P>(data: &Dataset, mu: &M, probs: &P, levels: &[f64]) -> Result<AipwLevels>
where
    M: OutcomeModel + ?Sized,
    P: LevelProbabilities + ?Sized,
{
    if levels.is_empty() {
        return Err(Error::EmptySample("exposure levels".into()));
    }
    if levels.windows(2).any(|p| !(p[0] < p[1])) {
        return Err(Error::InvalidInput("levels must be strictly increasing".into()));
    }
    let n = data.len();
    let mut level_of = Vec::with_capacity(n);
    for (i, &a) in data.a().iter().enumerate() {
        match levels.binary_search_by(|l| l.partial_cmp(&a).expect("finite levels")) {
            Ok(j) => level_of.push(j),
            Err(_) => {
                return Err(Error::InvalidInput(format!(
                    "exposure {a} of observation {i} is not a declared level"
                )))
            }
        }
    }
    let mut counts = vec![0usize; levels.len()];
    for &j in &level_of {
        counts[j] += 1;
    }
    if let Some(j) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptySample(format!("exposure level {}", levels[j])));
    }

    let mut plug_in = vec![0.0; levels.len()];
    for (j, &lvl) in levels.iter().enumerate() {
        plug_in[j] = (0..n).map(|i| mu.predict(lvl, data.w(i))).sum::<f64>() / n as f64;
    }
    let mut weighted_resid = vec![0.0; levels.len()];
    let mut pseudo = PseudoOutcomes {
        xi: Vec::with_capacity(n),
        residual: Vec::with_capacity(n),
        mu_bar: Vec::with_capacity(n),
    };
    for i in 0..n {
        let j = level_of[i];
        let w = data.w(i);
        let p = probs.probability(j, w);
        let m = mu.predict(levels[j], w);
        if !p.is_finite() || !m.is_finite() {
            return Err(Error::NonFinite(format!("nuisance evaluation at observation {i}")));
        }
        if p <= 0.0 {
            return Err(Error::NonPositiveWeight(i));
        }
        let r = (data.y()[i] - m) / p;
        weighted_resid[j] += r;
        let scaled = r * counts[j] as f64 / n as f64;
        pseudo.residual.push(scaled);
        pseudo.mu_bar.push(plug_in[j]);
        pseudo.xi.push(scaled + plug_in[j]);
    }
    let estimates = weighted_resid
        .iter()
        .zip(&plug_in)
        .map(|(r, m)| r / n as f64 + m)
        .collect();
    Ok(AipwLevels {
        levels: levels.to_vec(),
        counts,
        estimates,
        level_of,
        pseudo,
    })
}

/// Isotonic regression of the AIPW level estimates with weights `n_j`.
pub fn fit_discrete<M, P>(data: &Dataset, mu: &M, probs: &P, levels: &[f64]) -> Result<DoseResponseFit>
where
    M: OutcomeModel + ?Sized,
    P: LevelProbabilities + ?Sized,
{
    let aipw = aipw_levels(data, mu, probs, levels)?;
    let n = data.len() as f64;
    let weights: Vec<f64> = aipw.counts.iter().map(|&c| c as f64).collect();
    let fitted = pava_weighted(&aipw.estimates, &weights)?;

    let mut coords = Vec::with_capacity(levels.len());
    let mut gamma = Vec::with_capacity(levels.len());
    let (mut c, mut s) = (0.0, 0.0);
    for (w, est) in weights.iter().zip(&aipw.estimates) {
        c += w;
        s += w * est;
        coords.push(c / n);
        gamma.push(s / n);
    }
    let mut x = vec![0.0];
    let mut y = vec![0.0];
    x.extend_from_slice(&coords);
    y.extend_from_slice(&gamma);
    let minorant = gcm(&PlanarPoints::new(x, y)?)?;
    Ok(DoseResponseFit {
        variant: Variant::Discrete,
        support: aipw.levels,
        coords,
        gamma,
        levels: fitted,
        minorant,
        ranks: RankTransform::new(data.a())?,
        exposures: data.a().to_vec(),
        pseudo: aipw.pseudo,
        restriction: None,
    })
}
