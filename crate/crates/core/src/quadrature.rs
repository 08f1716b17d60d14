//! Gauss–Hermite rules for expectations under standard normal variables.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub const DEFAULT_NODES: usize = 24;

/// Probabilists' Gauss–Hermite rule: `E f(Z) ~ sum_k w_k f(x_k)` with
/// weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub–Welsch: nodes are the eigenvalues of the Jacobi matrix of the
    /// monic Hermite recurrence `He_{k+1} = x He_k - k He_{k-1}`, weights the
    /// squared first components of the normalized eigenvectors.
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("need at least one node".into()));
        }
        let mut j = DMatrix::<f64>::zeros(m, m);
        for k in 1..m {
            let b = (k as f64).sqrt();
            j[(k, k - 1)] = b;
            j[(k - 1, k)] = b;
        }
        let eig = SymmetricEigen::new(j);
        let mut pairs: Vec<(f64, f64)> = (0..m)
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        // symmetrize to remove eigensolver noise
        for k in 0..m / 2 {
            let (l, r) = (pairs[k], pairs[m - 1 - k]);
            let x = 0.5 * (r.0 - l.0);
            let w = 0.5 * (l.1 + r.1);
            pairs[k] = (-x, w);
            pairs[m - 1 - k] = (x, w);
        }
        if m % 2 == 1 {
            pairs[m / 2].0 = 0.0;
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// `E f(Z)` for `Z` standard normal in `dim` dimensions, on the tensor grid.
    pub fn expect_nd(&self, dim: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
        let m = self.len();
        let mut idx = vec![0usize; dim];
        let mut z = vec![0.0; dim];
        let mut acc = 0.0;
        loop {
            let mut w = 1.0;
            for d in 0..dim {
                z[d] = self.nodes[idx[d]];
                w *= self.weights[idx[d]];
            }
            acc += w * f(&z);
            let mut d = 0;
            loop {
                if d == dim {
                    return acc;
                }
                idx[d] += 1;
                if idx[d] < m {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }
}
