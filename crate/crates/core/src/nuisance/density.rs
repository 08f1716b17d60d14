//! Conditional density of the rank-scale exposure `U = F(A)` given `W`,
//! linear in `u`:
//!
//! `g(u | w) = lambda(w) + 2u (1 - lambda(w))`, with
//! `lambda(w) = 0.1 + 1.8 expit(x(w)' beta)`.
//!
//! The density lies in `[0.1, 1.9]` for every `beta`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::logistic::expit;
use super::{dot, Design};
use crate::error::{ensure_finite, Error, Result};

const MAX_ITER: usize = 500;
const GRAD_TOL: f64 = 1e-8;
const COEF_BOX: f64 = 50.0;

pub fn slope_lambda(index: f64) -> f64 {
    0.1 + 1.8 * expit(index)
}

/// `lambda + 2u(1 - lambda)` on `[0, 1]`.
pub fn slope_density(u: f64, lambda: f64) -> f64 {
    lambda + 2.0 * u * (1.0 - lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSlopeDensity {
    pub coef: Vec<f64>,
    pub iterations: usize,
    /// Inverse observed information at the solution (row-major).
    #[serde(skip)]
    pub covariance: Option<Vec<f64>>,
}

impl LinearSlopeDensity {
    pub fn density(&self, u: f64, x: &[f64]) -> f64 {
        slope_density(u, slope_lambda(dot(x, &self.coef)))
    }

    pub fn standard_errors(&self) -> Option<Vec<f64>> {
        let k = self.coef.len();
        self.covariance
            .as_ref()
            .map(|c| (0..k).map(|i| c[i * k + i].sqrt()).collect())
    }
}

fn loglik(u: &[f64], x: &Design, beta: &[f64]) -> f64 {
    (0..x.nrows())
        .map(|i| slope_density(u[i], slope_lambda(dot(x.row(i), beta))).ln())
        .sum()
}

struct Derivatives {
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    outer: DMatrix<f64>,
}

fn derivatives(u: &[f64], x: &Design, beta: &[f64]) -> Derivatives {
    let k = x.ncols();
    let mut grad = DVector::zeros(k);
    let mut hess = DMatrix::zeros(k, k);
    let mut outer = DMatrix::zeros(k, k);
    for i in 0..x.nrows() {
        let row = x.row(i);
        let s = expit(dot(row, beta));
        let lam = 0.1 + 1.8 * s;
        let d = slope_density(u[i], lam);
        let c = 1.0 - 2.0 * u[i];
        let dlam = 1.8 * s * (1.0 - s);
        let d2lam = dlam * (1.0 - 2.0 * s);
        let g1 = c * dlam / d;
        let g2 = c * d2lam / d - g1 * g1;
        for a in 0..k {
            grad[a] += g1 * row[a];
            for b in 0..=a {
                hess[(a, b)] += g2 * row[a] * row[b];
                outer[(a, b)] += g1 * g1 * row[a] * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            hess[(b, a)] = hess[(a, b)];
            outer[(b, a)] = outer[(a, b)];
        }
    }
    Derivatives { grad, hess, outer }
}

/// Maximum-likelihood fit of the index coefficients by projected Newton
/// ascent with backtracking. `x` holds the index design (intercept column
/// included when wanted); `u` are rank-scale exposures in `[0, 1]`.
pub fn fit_linear_slope_density(u: &[f64], x: &Design) -> Result<LinearSlopeDensity> {
    let (n, k) = (x.nrows(), x.ncols());
    if u.len() != n {
        return Err(Error::InvalidInput(format!("design has {n} rows, u has {}", u.len())));
    }
    if n == 0 {
        return Err(Error::EmptySample("density fit".into()));
    }
    ensure_finite(u, "u")?;
    if let Some(i) = u.iter().position(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidInput(format!("u[{i}] = {} outside [0, 1]", u[i])));
    }

    let mut beta = vec![0.0; k];
    let mut ll = loglik(u, x, &beta);
    for iter in 0..MAX_ITER {
        let der = derivatives(u, x, &beta);
        if der.grad.amax() < GRAD_TOL {
            let covariance = (-der.hess).cholesky().map(|c| c.inverse().iter().copied().collect());
            return Ok(LinearSlopeDensity {
                coef: beta,
                iterations: iter,
                covariance,
            });
        }
        // Newton where the Hessian is negative definite, otherwise a
        // BHHH-preconditioned ascent direction.
        let dir = match (-der.hess.clone()).cholesky() {
            Some(c) => c.solve(&der.grad),
            None => {
                let mut b = der.outer.clone();
                for a in 0..k {
                    b[(a, a)] += 1e-8;
                }
                b.cholesky()
                    .ok_or_else(|| Error::Singular("density information matrix".into()))?
                    .solve(&der.grad)
            }
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..50 {
            let cand: Vec<f64> = beta
                .iter()
                .zip(dir.iter())
                .map(|(b, d)| (b + t * d).clamp(-COEF_BOX, COEF_BOX))
                .collect();
            let cand_ll = loglik(u, x, &cand);
            if cand_ll >= ll {
                moved = cand != beta;
                beta = cand;
                ll = cand_ll;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            // stalled at machine precision
            let covariance = (-der.hess).cholesky().map(|c| c.inverse().iter().copied().collect());
            return Ok(LinearSlopeDensity {
                coef: beta,
                iterations: iter + 1,
                covariance,
            });
        }
    }
    Err(Error::NoConvergence(MAX_ITER))
}
