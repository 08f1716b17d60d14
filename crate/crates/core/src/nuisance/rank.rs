use serde::{Deserialize, Serialize};

use super::OutcomeModel;
use crate::error::{ensure_finite, Error, Result};

/// Empirical CDF `F_n(a) = (1/n) #{i : A_i <= a}` of a sample of exposures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTransform {
    sorted: Vec<f64>,
}

impl RankTransform {
    pub fn new(exposures: &[f64]) -> Result<Self> {
        if exposures.is_empty() {
            return Err(Error::EmptySample("rank transform".into()));
        }
        ensure_finite(exposures, "exposure")?;
        let mut sorted = exposures.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Number of sample exposures `<= a`.
    pub fn count_at_or_below(&self, a: f64) -> usize {
        self.sorted.partition_point(|&v| v <= a)
    }

    pub fn cdf(&self, a: f64) -> f64 {
        self.count_at_or_below(a) as f64 / self.sorted.len() as f64
    }

    /// Left-continuous inverse: the smallest sample exposure `a` with
    /// `F_n(a) >= u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.sorted.len();
        let k = (u * n as f64).ceil().clamp(1.0, n as f64) as usize;
        self.sorted[k - 1]
    }
}

/// An outcome model fitted on `(U, W)` with `U = F_n(A)`, evaluated on the
/// original exposure scale through the empirical CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankWrapped<M> {
    pub base: M,
    pub ranks: RankTransform,
}

pub fn rank_wrap_outcome<M: OutcomeModel>(base: M, ranks: RankTransform) -> RankWrapped<M> {
    RankWrapped { base, ranks }
}

impl<M: OutcomeModel> OutcomeModel for RankWrapped<M> {
    fn predict(&self, a: f64, w: &[f64]) -> f64 {
        self.base.predict(self.ranks.cdf(a), w)
    }
}
