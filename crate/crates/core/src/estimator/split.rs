use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::crossfit::FoldAssignment;
use super::DoseResponseFit;
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Independent fits on `m` disjoint subsamples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitFit {
    pub fits: Vec<DoseResponseFit>,
    /// Full sample size, used for the interval's `n^{1/3}` scaling.
    pub n: usize,
}

impl SplitFit {
    pub fn from_fits(fits: Vec<DoseResponseFit>, n: usize) -> Result<Self> {
        if fits.len() < 2 {
            return Err(Error::TooFewPoints {
                needed: 2,
                got: fits.len(),
            });
        }
        Ok(Self { fits, n })
    }

    pub fn m(&self) -> usize {
        self.fits.len()
    }

    /// Per-split estimates at `a`.
    pub fn values(&self, a: f64) -> Result<Vec<f64>> {
        self.fits.iter().map(|f| f.evaluate(a)).collect()
    }

    /// `(1/m) sum_j theta_{n,j}(a)`.
    pub fn evaluate(&self, a: f64) -> Result<f64> {
        let v = self.values(a)?;
        Ok(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Randomly partitions the sample into `m` near-equal parts and runs
/// `fit_one` on each. Parts are fitted in parallel; the result does not
/// depend on scheduling.
pub fn fit_sample_split<F>(data: &Dataset, m: usize, seed: u64, fit_one: F) -> Result<SplitFit>
where
    F: Fn(&Dataset) -> Result<DoseResponseFit> + Sync,
{
    if m < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 splits, got {m}")));
    }
    let n = data.len();
    let min_size = 10.max(2 * data.n_covariates());
    if n / m < min_size {
        return Err(Error::TooFewPoints {
            needed: min_size,
            got: n / m,
        });
    }
    let parts = FoldAssignment::new(n, m, seed)?;
    let fits = parts
        .folds
        .par_iter()
        .map(|idx| fit_one(&data.subset(idx)?))
        .collect::<Result<Vec<_>>>()?;
    SplitFit::from_fits(fits, n)
}
