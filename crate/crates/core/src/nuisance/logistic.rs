use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{dot, Design};
use crate::error::{ensure_finite, Error, Result};

const MAX_ITER: usize = 100;
const SCORE_TOL: f64 = 1e-8;
const DIVERGENCE_NORM: f64 = 1e3;

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `log(1 + e^x)` without overflow.
fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Result of a ridge-penalized logistic regression fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub coef: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Penalized log-likelihood after each accepted step (first entry at zero).
    pub loglik_trace: Vec<f64>,
    /// Inverse penalized information at the solution.
    #[serde(skip)]
    pub covariance: Option<Vec<f64>>,
}

impl LogisticFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        expit(dot(x, &self.coef))
    }

    /// Asymptotic standard errors from the inverse information.
    pub fn standard_errors(&self) -> Option<Vec<f64>> {
        let k = self.coef.len();
        self.covariance
            .as_ref()
            .map(|c| (0..k).map(|i| c[i * k + i].sqrt()).collect())
    }
}

fn penalized_loglik(x: &Design, y: &[f64], beta: &[f64], ridge: f64) -> f64 {
    let ll: f64 = (0..x.nrows())
        .map(|i| {
            let eta = dot(x.row(i), beta);
            y[i] * eta - log1p_exp(eta)
        })
        .sum();
    ll - 0.5 * ridge * beta.iter().map(|b| b * b).sum::<f64>()
}

/// Maximizes the ridge-penalized Bernoulli log-likelihood by iteratively
/// reweighted least squares with step halving.
pub fn fit_logistic(x: &Design, y: &[f64], ridge: f64) -> Result<LogisticFit> {
    let (n, k) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::InvalidInput(format!("design has {n} rows, y has {}", y.len())));
    }
    if n == 0 {
        return Err(Error::EmptySample("logistic regression".into()));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidInput(format!("ridge must be non-negative, got {ridge}")));
    }
    if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidInput(format!("y[{i}] = {} is not binary", y[i])));
    }
    ensure_finite(&x.values, "design")?;

    let mut beta = vec![0.0; k];
    let mut ll = penalized_loglik(x, y, &beta, ridge);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    let mut info = DMatrix::<f64>::zeros(k, k);

    while iterations <= MAX_ITER {
        let mut score = DVector::<f64>::zeros(k);
        info.fill(0.0);
        for i in 0..n {
            let row = x.row(i);
            let p = expit(dot(row, &beta));
            let wt = p * (1.0 - p);
            let r = y[i] - p;
            for a in 0..k {
                score[a] += row[a] * r;
                let wa = wt * row[a];
                for b in 0..=a {
                    info[(a, b)] += wa * row[b];
                }
            }
        }
        for a in 0..k {
            score[a] -= ridge * beta[a];
            info[(a, a)] += ridge;
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
            }
        }
        if score.amax() < SCORE_TOL {
            converged = true;
            break;
        }
        if iterations == MAX_ITER {
            break;
        }
        let chol = info
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("logistic information matrix".into()))?;
        let step = chol.solve(&score);

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + t * s).collect();
            let cand_ll = penalized_loglik(x, y, &cand, ridge);
            if cand_ll >= ll {
                accepted = Some((cand, cand_ll));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((b, l)) => {
                beta = b;
                ll = l;
                trace.push(ll);
            }
            // no ascent possible at machine precision: we are at the optimum
            None => {
                converged = true;
                break;
            }
        }
        let norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            return Err(Error::Diverged(format!(
                "coefficient norm {norm:.3e} exceeds {DIVERGENCE_NORM:.0e} (separation?)"
            )));
        }
    }

    if ridge == 0.0 {
        let separated = (0..n).all(|i| (y[i] - expit(dot(x.row(i), &beta))).abs() < 1e-6);
        if separated {
            return Err(Error::Diverged("outcomes perfectly separated".into()));
        }
    }

    let covariance = info.cholesky().map(|c| c.inverse().iter().copied().collect::<Vec<_>>());
    Ok(LogisticFit {
        coef: beta,
        iterations,
        converged,
        loglik_trace: trace,
        covariance,
    })
}
