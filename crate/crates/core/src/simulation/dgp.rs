//! The simulation design: `W ~ N(0, I_4)`, `U | W` with density
//! `lambda(w) + 2u (1 - lambda(w))`, `A = F^{-1}(U)` for a two-component
//! normal mixture `F`, and `Y | A, W ~ Bernoulli(mu_0(A, W))`.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nuisance::{expit, slope_density};
use crate::quadrature::{GaussHermite, DEFAULT_NODES};

const QUANTILE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    pub beta: [f64; 4],
    pub gamma1: [f64; 5],
    pub gamma2: [f64; 5],
    pub gamma3: f64,
    pub mixture_means: [f64; 2],
    pub mixture_sd: f64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            beta: [-1.0, -1.0, 1.0, 1.0],
            gamma1: [-1.0, -1.0, -1.0, 1.0, 1.0],
            gamma2: [3.0, -1.0, -1.0, 1.0, 1.0],
            gamma3: 3.0,
            mixture_means: [-2.0, 2.0],
            mixture_sd: 1.0,
        }
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn gh() -> &'static GaussHermite {
    static RULE: OnceLock<GaussHermite> = OnceLock::new();
    RULE.get_or_init(|| GaussHermite::new(DEFAULT_NODES).expect("valid node count"))
}

impl DgpConfig {
    pub const DIM: usize = 4;

    pub fn lambda(&self, w: &[f64]) -> f64 {
        let idx: f64 = self.beta.iter().zip(w).map(|(b, x)| b * x).sum();
        0.1 + 1.8 * expit(idx)
    }

    /// `(c, v)` with `gamma1' w_bar + a gamma2' w_bar + gamma3 a^2 = c + v' w`.
    pub fn outcome_index(&self, a: f64) -> (f64, [f64; 4]) {
        let c = self.gamma1[0] + a * self.gamma2[0] + self.gamma3 * a * a;
        let mut v = [0.0; 4];
        for (j, vj) in v.iter_mut().enumerate() {
            *vj = self.gamma1[j + 1] + a * self.gamma2[j + 1];
        }
        (c, v)
    }

    pub fn mu0(&self, a: f64, w: &[f64]) -> f64 {
        let (c, v) = self.outcome_index(a);
        expit(c + v.iter().zip(w).map(|(x, y)| x * y).sum::<f64>())
    }

    pub fn mixture_cdf(&self, a: f64) -> f64 {
        let s = self.mixture_sd;
        0.5 * (std_normal_cdf((a - self.mixture_means[0]) / s) + std_normal_cdf((a - self.mixture_means[1]) / s))
    }

    pub fn mixture_pdf(&self, a: f64) -> f64 {
        let s = self.mixture_sd;
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        0.5 * (phi((a - self.mixture_means[0]) / s) + phi((a - self.mixture_means[1]) / s)) / s
    }

    /// Bisection on the mixture CDF down to a bracket of width `1e-10`.
    pub fn mixture_quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::InvalidInput(format!("quantile level {u} outside (0, 1)")));
        }
        let (m0, m1) = (
            self.mixture_means[0].min(self.mixture_means[1]),
            self.mixture_means[0].max(self.mixture_means[1]),
        );
        let mut lo = m0 - 40.0 * self.mixture_sd;
        let mut hi = m1 + 40.0 * self.mixture_sd;
        while hi - lo > QUANTILE_TOL {
            let mid = 0.5 * (lo + hi);
            if self.mixture_cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Density of `U = F(A)` given `W = w`, evaluated at `u`.
    pub fn rank_density(&self, u: f64, w: &[f64]) -> f64 {
        if (0.0..=1.0).contains(&u) {
            slope_density(u, self.lambda(w))
        } else {
            0.0
        }
    }

    /// `g_0(a, w) = pi_0(a | w) / f_0(a)`, which equals the rank-scale density at `F(a)`.
    pub fn g0(&self, a: f64, w: &[f64]) -> f64 {
        self.rank_density(self.mixture_cdf(a), w)
    }

    /// `pi_0(a | w)`.
    pub fn conditional_density(&self, a: f64, w: &[f64]) -> f64 {
        self.g0(a, w) * self.mixture_pdf(a)
    }

    /// Closed-form inverse of `u -> lambda u + (1 - lambda) u^2`.
    pub fn rank_quantile(lambda: f64, v: f64) -> f64 {
        2.0 * v / (lambda + (lambda * lambda + 4.0 * (1.0 - lambda) * v).sqrt())
    }

    /// Draws `n` observations; deterministic given `seed`.
    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y = Vec::with_capacity(n);
        let mut a = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n * Self::DIM);
        for _ in 0..n {
            let wi: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            let v = loop {
                let v: f64 = rng.random();
                if v > 0.0 {
                    break v;
                }
            };
            let u = Self::rank_quantile(self.lambda(&wi), v);
            let ai = self.mixture_quantile(u.min(1.0 - 1e-16))?;
            let yi = f64::from(rng.random::<f64>() < self.mu0(ai, &wi));
            y.push(yi);
            a.push(ai);
            w.extend_from_slice(&wi);
        }
        Dataset::new(y, a, w, Self::DIM)
    }

    /// `theta_0(a) = E_W mu_0(a, W)` by tensor Gauss–Hermite quadrature.
    pub fn true_theta(&self, a: f64) -> f64 {
        gh().expect_nd(Self::DIM, |w| self.mu0(a, w))
    }

    /// Monte Carlo version of [`Self::true_theta`].
    pub fn true_theta_mc(&self, a: f64, draws: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = 0.0;
        for _ in 0..draws {
            let w: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            s += self.mu0(a, &w);
        }
        s / draws as f64
    }

    /// `theta_0(a) = E expit(c + |v| Z)`: the outcome index is Gaussian given
    /// `a`, so the expectation is one-dimensional. Composite Simpson on
    /// `|z| <= 12`.
    pub fn true_theta_projected(&self, a: f64) -> f64 {
        let (c, v) = self.outcome_index(a);
        let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let m = 20_000;
        let (lo, hi) = (-12.0, 12.0);
        let h = (hi - lo) / m as f64;
        let f = |z: f64| expit(c + s * z) * (-0.5 * z * z).exp();
        let mut acc = f(lo) + f(hi);
        for k in 1..m {
            let z = lo + k as f64 * h;
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(z);
        }
        acc * h / 3.0 / (2.0 * std::f64::consts::PI).sqrt()
    }

    /// `kappa_0(a) = E_W[ mu_0 (1 - mu_0)(a, W) / g_0(a, W) ]`.
    pub fn true_kappa(&self, a: f64) -> f64 {
        gh().expect_nd(Self::DIM, |w| {
            let m = self.mu0(a, w);
            m * (1.0 - m) / self.g0(a, w)
        })
    }

    /// `E[Y | A = a] = E_W[ mu_0(a, W) g_0(a, W) ]`, since `E_W g_0(a, W) = 1`.
    pub fn conditional_mean(&self, a: f64) -> f64 {
        gh().expect_nd(Self::DIM, |w| self.mu0(a, w) * self.g0(a, w))
    }

    /// `Var(Y | A = a)` for the binary outcome.
    pub fn conditional_variance(&self, a: f64) -> f64 {
        let m = self.conditional_mean(a);
        m * (1.0 - m)
    }
}
