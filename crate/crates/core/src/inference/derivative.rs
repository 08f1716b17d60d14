use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{DoseResponseFit, Variant};

/// Fewest midpoints that must receive positive kernel weight.
const MIN_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiPrime {
    /// Estimate after flooring at zero.
    pub value: f64,
    /// Local-quadratic slope before flooring.
    pub raw: f64,
    pub floored: bool,
    /// Bandwidth actually used, after widening.
    pub bandwidth: f64,
}

/// Default rank-scale bandwidth `0.5 n^{-1/7}`.
pub fn default_psi_bandwidth(n: usize) -> f64 {
    0.5 * (n as f64).powf(-1.0 / 7.0)
}

fn epanechnikov(x: f64) -> f64 {
    if x.abs() < 1.0 {
        0.75 * (1.0 - x * x)
    } else {
        0.0
    }
}

/// Slope at `u0` of an Epanechnikov-weighted quadratic fit to `(u_j, v_j)`.
///
/// The bandwidth is widened when needed so that at least five points (or all
/// of them, if fewer) get positive weight.
pub fn local_quadratic_derivative(u: &[f64], v: &[f64], u0: f64, bandwidth: f64) -> Result<(f64, f64)> {
    if u.len() != v.len() {
        return Err(Error::InvalidInput("abscissae and ordinates differ in length".into()));
    }
    if u.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: u.len(),
        });
    }
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let mut dist: Vec<f64> = u.iter().map(|x| (x - u0).abs()).collect();
    dist.sort_by(f64::total_cmp);
    let need = MIN_POINTS.min(u.len());
    let h = bandwidth.max(dist[need - 1] * (1.0 + 1e-9) + f64::MIN_POSITIVE);

    let mut xtx = Matrix3::<f64>::zeros();
    let mut xty = Vector3::<f64>::zeros();
    for (&x, &y) in u.iter().zip(v) {
        let k = epanechnikov((x - u0) / h);
        if k == 0.0 {
            continue;
        }
        let d = x - u0;
        let row = Vector3::new(1.0, d, d * d);
        xtx += k * row * row.transpose();
        xty += k * y * row;
    }
    let beta = xtx
        .try_inverse()
        .ok_or_else(|| Error::Singular("local quadratic design".into()))?
        * xty;
    Ok((beta[1], h))
}

/// `psi_n'(F_n(a))` from a local quadratic fit to the points
/// `(midpoint of each constant piece of psi_n, its level)`.
pub fn estimate_psi_prime(fit: &DoseResponseFit, a: f64, bandwidth: Option<f64>) -> Result<PsiPrime> {
    if fit.variant == Variant::NoTransform {
        return Err(Error::Unsupported(
            "derivative estimation is defined on the rank scale".into(),
        ));
    }
    let u0 = fit.rank_of(a);
    if !(u0 > 0.0) {
        return Err(Error::OutOfDomain {
            t: a,
            lo: fit.support[0],
            hi: *fit.support.last().unwrap(),
        });
    }
    let knots = fit.minorant.knots();
    let slopes = fit.minorant.slopes();
    if slopes.len() == 1 {
        // a single level: psi_n is flat
        return Ok(PsiPrime {
            value: 0.0,
            raw: 0.0,
            floored: false,
            bandwidth: bandwidth.unwrap_or_else(|| default_psi_bandwidth(fit.n())),
        });
    }
    if slopes.len() < 3 {
        return Err(Error::Degenerate(format!(
            "psi_n has {} distinct levels; at least 3 are needed",
            slopes.len()
        )));
    }
    let mids: Vec<f64> = knots.windows(2).map(|k| 0.5 * (k[0] + k[1])).collect();
    let h = bandwidth.unwrap_or_else(|| default_psi_bandwidth(fit.n()));
    let (raw, used) = local_quadratic_derivative(&mids, &slopes, u0, h)?;
    Ok(PsiPrime {
        value: raw.max(0.0),
        raw,
        floored: raw < 0.0,
        bandwidth: used,
    })
}
