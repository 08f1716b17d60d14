use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pseudo::{average_over, residual, PseudoOutcomes};
use super::standard::fit_from_pseudo;
use super::{DoseResponseFit, Variant};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nuisance::{DensityRatioModel, FittedNuisance, NuisanceSpec, OutcomeModel};

/// A random partition of `0..n` into `v` folds whose sizes differ by at
/// most one: a seeded Fisher-Yates shuffle cut into contiguous blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub seed: u64,
    pub folds: Vec<Vec<usize>>,
}

impl FoldAssignment {
    pub fn new(n: usize, v: usize, seed: u64) -> Result<Self> {
        if v < 2 || v > n / 2 {
            return Err(Error::InvalidInput(format!(
                "fold count must lie in 2..={}, got {v}",
                n / 2
            )));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (base, extra) = (n / v, n % v);
        let mut folds = Vec::with_capacity(v);
        let mut start = 0;
        for k in 0..v {
            let len = base + usize::from(k < extra);
            let mut f = idx[start..start + len].to_vec();
            f.sort_unstable();
            folds.push(f);
            start += len;
        }
        Ok(Self { seed, folds })
    }

    /// Folds given explicitly; they must partition `0..n`.
    pub fn from_folds(n: usize, folds: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        for f in &folds {
            for &i in f {
                if i >= n || seen[i] {
                    return Err(Error::InvalidInput(format!("fold index {i} repeated or out of range")));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidInput("folds do not cover every observation".into()));
        }
        Ok(Self { seed: 0, folds })
    }

    pub fn v(&self) -> usize {
        self.folds.len()
    }

    pub fn n(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }

    /// Fold index of every observation.
    pub fn fold_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.n()];
        for (k, f) in self.folds.iter().enumerate() {
            for &i in f {
                out[i] = k;
            }
        }
        out
    }

    fn training(&self, k: usize) -> Vec<usize> {
        let n = self.n();
        let mut in_fold = vec![false; n];
        for &i in &self.folds[k] {
            in_fold[i] = true;
        }
        (0..n).filter(|&i| !in_fold[i]).collect()
    }
}

/// A fitted outcome regression and density ratio.
pub trait NuisancePair: Send + Sync {
    fn outcome(&self) -> &dyn OutcomeModel;
    fn ratio(&self) -> &dyn DensityRatioModel;
}

/// Builds a [`NuisancePair`] from a training sample.
pub trait NuisanceLearner: Sync {
    type Fitted: NuisancePair;
    fn learn(&self, train: &Dataset) -> Result<Self::Fitted>;
}

impl NuisancePair for FittedNuisance {
    fn outcome(&self) -> &dyn OutcomeModel {
        &self.outcome
    }
    fn ratio(&self) -> &dyn DensityRatioModel {
        &self.ratio
    }
}

impl NuisanceLearner for NuisanceSpec {
    type Fitted = FittedNuisance;
    fn learn(&self, train: &Dataset) -> Result<FittedNuisance> {
        self.fit(train)
    }
}

/// A "learner" that ignores its training data.
#[derive(Debug, Clone)]
pub struct FixedNuisance<M, G> {
    pub outcome: M,
    pub ratio: G,
}

impl<M: OutcomeModel, G: DensityRatioModel> NuisancePair for FixedNuisance<M, G> {
    fn outcome(&self) -> &dyn OutcomeModel {
        &self.outcome
    }
    fn ratio(&self) -> &dyn DensityRatioModel {
        &self.ratio
    }
}

impl<M, G> NuisanceLearner for FixedNuisance<M, G>
where
    M: OutcomeModel + Clone,
    G: DensityRatioModel + Clone,
{
    type Fitted = Self;
    fn learn(&self, _: &Dataset) -> Result<Self> {
        Ok(self.clone())
    }
}

/// Which covariate sample the marginalized regression averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuBarAveraging {
    /// Within the validation fold, as in the cross-fitted primitive.
    #[default]
    Fold,
    /// Over the whole sample. Only useful as a check against the
    /// non-cross-fitted pipeline.
    Full,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossFitOptions {
    pub mu_bar: MuBarAveraging,
}

/// A cross-fitted curve plus the per-fold nuisances it was built from.
#[derive(Debug, Clone)]
pub struct CrossFit<N> {
    pub fit: DoseResponseFit,
    pub folds: FoldAssignment,
    pub nuisances: Vec<N>,
}

pub fn fit_cross_fitted<L: NuisanceLearner>(
    data: &Dataset,
    learner: &L,
    folds: &FoldAssignment,
) -> Result<CrossFit<L::Fitted>> {
    fit_cross_fitted_with(data, learner, folds, CrossFitOptions::default())
}

/// Cross-fitted estimator. For fold `v` of size `N_v`, nuisances are learned
/// on the complement, and each `i` in the fold contributes
/// `(1 / (V N_v)) [ (Y_i - mu_v(A_i, W_i)) / g_v(A_i, W_i) + (1/N_v) sum_{j in v} mu_v(A_i, W_j) ]`
/// to the primitive at every `a >= A_i`. The stored pseudo-outcome carries
/// the factor `n / (V N_v)` so the shared `(1/n)` cusum reproduces these
/// weights.
pub fn fit_cross_fitted_with<L: NuisanceLearner>(
    data: &Dataset,
    learner: &L,
    folds: &FoldAssignment,
    options: CrossFitOptions,
) -> Result<CrossFit<L::Fitted>> {
    let n = data.len();
    if folds.n() != n {
        return Err(Error::InvalidInput(format!(
            "fold assignment covers {} observations, data has {n}",
            folds.n()
        )));
    }
    if let Some(k) = folds.folds.iter().position(|f| f.len() < 2) {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: folds.folds[k].len(),
        });
    }
    let v = folds.v();
    let nuisances = (0..v)
        .into_par_iter()
        .map(|k| learner.learn(&data.subset(&folds.training(k))?))
        .collect::<Result<Vec<_>>>()?;

    let mut pseudo = PseudoOutcomes {
        xi: vec![0.0; n],
        residual: vec![0.0; n],
        mu_bar: vec![0.0; n],
    };
    for (k, fold) in folds.folds.iter().enumerate() {
        let (mu, g) = (nuisances[k].outcome(), nuisances[k].ratio());
        let scale = n as f64 / (v * fold.len()) as f64;
        for &i in fold {
            let r = residual(mu, g, data, i)?;
            let a = data.a()[i];
            let m = match options.mu_bar {
                MuBarAveraging::Fold => average_over(mu, a, data, fold.iter().copied()),
                MuBarAveraging::Full => average_over(mu, a, data, 0..n),
            };
            if !m.is_finite() {
                return Err(Error::NonFinite(format!("marginalized regression at observation {i}")));
            }
            pseudo.residual[i] = r;
            pseudo.mu_bar[i] = m;
            pseudo.xi[i] = scale * (r + m);
        }
    }
    let fit = fit_from_pseudo(data.a().to_vec(), pseudo, Variant::CrossFitted)?;
    Ok(CrossFit {
        fit,
        folds: folds.clone(),
        nuisances,
    })
}
