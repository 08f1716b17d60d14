//! Local linear regression of the pseudo-outcomes with a Gaussian kernel,
//! a leave-one-out bandwidth and a heteroskedastic sandwich interval.
//!
//! This is a comparison baseline only. It does not reproduce any published
//! bandwidth selector for this kind of smoother.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LocalLinear {
    a: Vec<f64>,
    y: Vec<f64>,
    pub bandwidth: f64,
    residual: Vec<f64>,
}

fn weights(a: &[f64], x0: f64, h: f64) -> Option<Vec<f64>> {
    let k: Vec<f64> = a.iter().map(|&x| (-0.5 * ((x - x0) / h).powi(2)).exp()).collect();
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (&x, &kk) in a.iter().zip(&k) {
        let d = x - x0;
        s0 += kk;
        s1 += kk * d;
        s2 += kk * d * d;
    }
    let det = s0 * s2 - s1 * s1;
    if !(det > 1e-12 * s0 * s2) {
        return None;
    }
    Some(
        a.iter()
            .zip(&k)
            .map(|(&x, &kk)| kk * (s2 - (x - x0) * s1) / det)
            .collect(),
    )
}

fn loo_score(a: &[f64], y: &[f64], h: f64) -> Option<(f64, Vec<f64>)> {
    let mut sse = 0.0;
    let mut resid = Vec::with_capacity(a.len());
    for i in 0..a.len() {
        let l = weights(a, a[i], h)?;
        let fit: f64 = l.iter().zip(y).map(|(w, v)| w * v).sum();
        let r = y[i] - fit;
        let lii = l[i];
        if lii >= 1.0 - 1e-10 {
            return None;
        }
        sse += (r / (1.0 - lii)).powi(2);
        resid.push(r);
    }
    Some((sse, resid))
}

impl LocalLinear {
    /// Bandwidth chosen by leave-one-out squared error over `count`
    /// log-spaced multiples of the exposure standard deviation in `[0.02, 2]`.
    pub fn fit(a: &[f64], y: &[f64], count: usize) -> Result<Self> {
        if a.len() != y.len() || a.len() < 3 {
            return Err(Error::TooFewPoints {
                needed: 3,
                got: a.len().min(y.len()),
            });
        }
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let sd = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        if !(sd > 0.0) {
            return Err(Error::Degenerate("exposure has no spread".into()));
        }
        let count = count.max(2);
        let (l0, l1) = (0.02f64.ln(), 2.0f64.ln());
        let mut best: Option<(f64, f64, Vec<f64>)> = None;
        for k in 0..count {
            let h = sd * (l0 + (l1 - l0) * k as f64 / (count - 1) as f64).exp();
            if let Some((s, r)) = loo_score(a, y, h) {
                if best.as_ref().is_none_or(|b| s < b.0) {
                    best = Some((s, h, r));
                }
            }
        }
        let (_, bandwidth, residual) = best.ok_or_else(|| Error::Degenerate("no admissible bandwidth".into()))?;
        Ok(Self {
            a: a.to_vec(),
            y: y.to_vec(),
            bandwidth,
            residual,
        })
    }

    /// Estimate and sandwich standard error `sqrt(sum_i l_i^2 r_i^2)` at `x0`.
    pub fn estimate(&self, x0: f64) -> Result<(f64, f64)> {
        let l = weights(&self.a, x0, self.bandwidth)
            .ok_or_else(|| Error::Degenerate(format!("no local design at {x0}")))?;
        let est = l.iter().zip(&self.y).map(|(w, v)| w * v).sum();
        let var: f64 = l.iter().zip(&self.residual).map(|(w, r)| (w * r).powi(2)).sum();
        Ok((est, var.sqrt()))
    }

    pub fn interval(&self, x0: f64, alpha: f64) -> Result<(f64, f64, f64)> {
        let (est, se) = self.estimate(x0)?;
        let z = Normal::standard().inverse_cdf(1.0 - alpha / 2.0);
        Ok((est, est - z * se, est + z * se))
    }
}
