use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{dot, Design};
use crate::error::{ensure_finite, Error, Result};

/// Ridge least-squares fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub coef: Vec<f64>,
    /// Residual variance with `n - k` degrees of freedom.
    pub sigma2: f64,
}

impl LinearFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        dot(x, &self.coef)
    }
}

pub fn fit_linear(x: &Design, y: &[f64], ridge: f64) -> Result<LinearFit> {
    let (n, k) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::InvalidInput(format!("design has {n} rows, y has {}", y.len())));
    }
    if n == 0 {
        return Err(Error::EmptySample("least squares".into()));
    }
    ensure_finite(y, "y")?;
    let mut xtx = DMatrix::<f64>::zeros(k, k);
    let mut xty = DVector::<f64>::zeros(k);
    for i in 0..n {
        let row = x.row(i);
        for a in 0..k {
            xty[a] += row[a] * y[i];
            for b in 0..=a {
                xtx[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..k {
        xtx[(a, a)] += ridge;
        for b in 0..a {
            xtx[(b, a)] = xtx[(a, b)];
        }
    }
    let chol = xtx
        .cholesky()
        .ok_or_else(|| Error::Singular("least-squares normal equations".into()))?;
    let coef: Vec<f64> = chol.solve(&xty).iter().copied().collect();
    let rss: f64 = (0..n).map(|i| (y[i] - dot(x.row(i), &coef)).powi(2)).sum();
    let dof = n.saturating_sub(k).max(1);
    Ok(LinearFit {
        coef,
        sigma2: rss / dof as f64,
    })
}
