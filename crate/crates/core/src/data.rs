use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Observations `(Y_i, A_i, W_i)` with a row-major `n x p` covariate block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    y: Vec<f64>,
    a: Vec<f64>,
    w: Vec<f64>,
    p: usize,
}

impl Dataset {
    pub fn new(y: Vec<f64>, a: Vec<f64>, w: Vec<f64>, p: usize) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::TooFewPoints { needed: 2, got: n });
        }
        if a.len() != n || w.len() != n * p {
            return Err(Error::InvalidInput(format!(
                "row counts disagree: y={n}, a={}, w={} (p={p})",
                a.len(),
                w.len()
            )));
        }
        ensure_finite(&y, "y")?;
        ensure_finite(&a, "a")?;
        ensure_finite(&w, "w")?;
        // -0.0 and 0.0 must tie under total_cmp
        let a = a.into_iter().map(|v| v + 0.0).collect();
        Ok(Self { y, a, w, p })
    }

    /// Builds a dataset from covariate rows.
    pub fn from_rows(y: Vec<f64>, a: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidInput("ragged covariate rows".into()));
        }
        let w = rows.iter().flatten().copied().collect();
        Self::new(y, a, w, p)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        self.p
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn w(&self, i: usize) -> &[f64] {
        &self.w[i * self.p..(i + 1) * self.p]
    }

    pub fn covariates(&self) -> &[f64] {
        &self.w
    }

    /// True when every outcome is 0 or 1.
    pub fn binary_outcome(&self) -> bool {
        self.y.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Same outcomes and covariates with the exposure mapped through `h`.
    pub fn map_exposure(&self, h: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.y.clone(),
            self.a.iter().map(|&v| h(v)).collect(),
            self.w.clone(),
            self.p,
        )
    }

    /// Rows selected by `idx`, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let y = idx.iter().map(|&i| self.y[i]).collect();
        let a = idx.iter().map(|&i| self.a[i]).collect();
        let w = idx.iter().flat_map(|&i| self.w(i).iter().copied()).collect();
        Self::new(y, a, w, self.p)
    }
}
