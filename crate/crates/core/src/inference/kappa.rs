use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{CrossFit, DoseResponseFit, NuisancePair};
use crate::nuisance::{fit_linear, DensityRatioModel, Design, OutcomeModel, RankTransform};

/// Conditional variance `sigma^2(a, w)` of the outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarianceModel {
    /// `mu (1 - mu)` for a binary outcome.
    Bernoulli,
    /// Linear regression of squared residuals on `(F_n(a), w)`, truncated at zero.
    Linear { coef: Vec<f64>, ranks: RankTransform },
}

impl VarianceModel {
    pub fn sigma2<M: OutcomeModel + ?Sized>(&self, mu: &M, a: f64, w: &[f64]) -> f64 {
        match self {
            VarianceModel::Bernoulli => {
                let m = mu.predict(a, w);
                (m * (1.0 - m)).max(0.0)
            }
            VarianceModel::Linear { coef, ranks } => {
                let mut v = coef[0] + coef[1] * ranks.cdf(a);
                for (c, x) in coef[2..].iter().zip(w) {
                    v += c * x;
                }
                v.max(0.0)
            }
        }
    }
}

/// Picks the Bernoulli shortcut for 0/1 outcomes and otherwise regresses
/// `(Y - mu(A, W))^2` on `(1, F_n(A), W)`.
pub fn fit_variance_model<M: OutcomeModel + ?Sized>(data: &Dataset, mu: &M) -> Result<VarianceModel> {
    if data.binary_outcome() {
        return Ok(VarianceModel::Bernoulli);
    }
    let ranks = RankTransform::new(data.a())?;
    let p = data.n_covariates();
    let rows = (0..data.len()).map(|i| {
        let mut r = Vec::with_capacity(p + 2);
        r.push(1.0);
        r.push(ranks.cdf(data.a()[i]));
        r.extend_from_slice(data.w(i));
        r
    });
    let design = Design::from_rows(rows, p + 2);
    let sq: Vec<f64> = (0..data.len())
        .map(|i| (data.y()[i] - mu.predict(data.a()[i], data.w(i))).powi(2))
        .collect();
    let fit = fit_linear(&design, &sq, 1e-8)?;
    Ok(VarianceModel::Linear { coef: fit.coef, ranks })
}

fn average_checked(n: usize, term: impl Fn(usize) -> (f64, f64)) -> Result<f64> {
    let mut s = 0.0;
    for i in 0..n {
        let (s2, g) = term(i);
        if !s2.is_finite() || !g.is_finite() || g <= 0.0 {
            return Err(Error::NonFinite(format!("scale term at observation {i}")));
        }
        s += s2 / g;
    }
    Ok(s / n as f64)
}

/// `kappa_n(a) = (1/n) sum_i sigma^2(a, W_i) / g(a, W_i)` over the covariate sample.
pub fn kappa_plugin<M, G>(data: &Dataset, mu: &M, g: &G, var: &VarianceModel, a: f64) -> Result<f64>
where
    M: OutcomeModel + ?Sized,
    G: DensityRatioModel + ?Sized,
{
    average_checked(data.len(), |i| {
        let w = data.w(i);
        (var.sigma2(mu, a, w), g.ratio(a, w))
    })
}

/// Plug-in scale with each observation's term evaluated under the
/// nuisances of the fold it was held out from.
pub fn kappa_plugin_cross_fitted<N: NuisancePair>(
    data: &Dataset,
    cf: &CrossFit<N>,
    vars: &[VarianceModel],
    a: f64,
) -> Result<f64> {
    if vars.len() != cf.nuisances.len() {
        return Err(Error::InvalidInput("one variance model per fold is required".into()));
    }
    let fold_of = cf.folds.fold_of();
    average_checked(data.len(), |i| {
        let k = fold_of[i];
        let w = data.w(i);
        let nu = &cf.nuisances[k];
        (vars[k].sigma2(nu.outcome(), a, w), nu.ratio().ratio(a, w))
    })
}

/// `50` log-spaced bandwidths on `[2/n, 0.5]`.
pub fn default_kappa_grid(n: usize) -> Vec<f64> {
    let lo = (2.0 / n as f64).min(0.5);
    let (l0, l1) = (lo.ln(), 0.5f64.ln());
    (0..50).map(|k| (l0 + (l1 - l0) * k as f64 / 49.0).exp()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaDr {
    pub value: f64,
    pub bandwidth: f64,
    pub eta_bar: f64,
    /// `gamma_n(h)` over the grid, aligned with `grid`.
    pub gamma: Vec<f64>,
    pub grid: Vec<f64>,
}

/// Squared pseudo-residuals sorted by rank, with prefix sums of
/// `eta`, `eta u` and `eta u^2` for O(log n) Epanechnikov window sums.
struct RankedEta {
    u: Vec<f64>,
    p0: Vec<f64>,
    p1: Vec<f64>,
    p2: Vec<f64>,
}

impl RankedEta {
    fn new(u: Vec<f64>, eta: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..u.len()).collect();
        order.sort_by(|&i, &j| u[i].total_cmp(&u[j]).then(i.cmp(&j)));
        let mut p0 = vec![0.0];
        let mut p1 = vec![0.0];
        let mut p2 = vec![0.0];
        for &i in &order {
            let (x, e) = (u[i], eta[i]);
            p0.push(p0.last().unwrap() + e);
            p1.push(p1.last().unwrap() + e * x);
            p2.push(p2.last().unwrap() + e * x * x);
        }
        let u = order.iter().map(|&i| u[i]).collect();
        Self { u, p0, p1, p2 }
    }

    /// `(1/n) sum_i K_h(u_i - u0) eta_i` and the number of points with
    /// positive weight.
    fn smooth(&self, u0: f64, h: f64) -> (f64, usize) {
        let lo = self.u.partition_point(|&x| x <= u0 - h);
        let hi = self.u.partition_point(|&x| x < u0 + h);
        if hi <= lo {
            return (0.0, 0);
        }
        let s0 = self.p0[hi] - self.p0[lo];
        let s1 = self.p1[hi] - self.p1[lo];
        let s2 = self.p2[hi] - self.p2[lo];
        let quad = s2 - 2.0 * u0 * s1 + u0 * u0 * s0;
        let k = 0.75 * (s0 - quad / (h * h));
        ((k / (h * self.u.len() as f64)).max(0.0), hi - lo)
    }
}

/// `eta_i = [(Y_i - mu(A_i, W_i)) / g(A_i, W_i) + theta_mu(A_i) - theta_n(A_i)]^2`.
pub fn dr_eta(fit: &DoseResponseFit) -> Vec<f64> {
    let theta = fit.fitted_at_observations();
    (0..fit.n())
        .map(|i| (fit.pseudo.residual[i] + fit.pseudo.mu_bar[i] - theta[i]).powi(2))
        .collect()
}

/// Doubly-robust scale: kernel smoothing of `eta` on the rank scale, with
/// the bandwidth that brings `gamma_n(h) = (1/n) sum_j kappa*_h(A_j)`
/// closest to the mean of `eta`.
pub fn kappa_dr(fit: &DoseResponseFit, a: f64, grid: Option<&[f64]>) -> Result<KappaDr> {
    let n = fit.n();
    let default;
    let grid = match grid {
        Some(g) => g,
        None => {
            default = default_kappa_grid(n);
            &default
        }
    };
    if grid.is_empty() || grid.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::InvalidInput(
            "bandwidth grid must be non-empty and positive".into(),
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
    let eta = dr_eta(fit);
    let eta_bar = eta.iter().sum::<f64>() / n as f64;
    let u: Vec<f64> = fit.exposures.iter().map(|&x| fit.rank_of(x)).collect();
    let ranked = RankedEta::new(u, eta);
    let gamma: Vec<f64> = grid
        .iter()
        .map(|&h| ranked.u.iter().map(|&uj| ranked.smooth(uj, h).0).sum::<f64>() / n as f64)
        .collect();
    let mut best = 0;
    for k in 1..grid.len() {
        if (gamma[k] - eta_bar).powi(2) < (gamma[best] - eta_bar).powi(2) {
            best = k;
        }
    }
    let h = grid[best];
    let (value, support) = ranked.smooth(u0, h);
    if support == 0 {
        return Err(Error::BandwidthTooSmall(format!(
            "no observations within h = {h} of rank {u0}"
        )));
    }
    Ok(KappaDr {
        value,
        bandwidth: h,
        eta_bar,
        gamma,
        grid: grid.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{fit_causal_isotonic, PseudoOutcomes};
    use crate::nuisance::{OutcomeFn, RatioFn};

    #[test]
    fn plugin_constant_cases() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let data = Dataset::from_rows(vec![0.0; 10], (0..10).map(f64::from).collect(), &rows).unwrap();
        let half = OutcomeFn(|_: f64, _: &[f64]| 0.5);
        let two = RatioFn(|_: f64, _: &[f64]| 2.0);
        let k = kappa_plugin(&data, &half, &two, &VarianceModel::Bernoulli, 3.0).unwrap();
        assert_eq!(k, 0.125);

        let s2 = VarianceModel::Linear {
            coef: vec![0.7, 0.0, 0.0],
            ranks: RankTransform::new(data.a()).unwrap(),
        };
        let one = RatioFn(|_: f64, _: &[f64]| 1.0);
        assert!((kappa_plugin(&data, &half, &one, &s2, 3.0).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn variance_regression_recovers_constant_variance() {
        let n = 400;
        let a: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.5 } else { -1.5 }).collect();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![((i / 2) % 7) as f64]).collect();
        let data = Dataset::from_rows(y, a, &rows).unwrap();
        let zero = OutcomeFn(|_: f64, _: &[f64]| 0.0);
        let vm = fit_variance_model(&data, &zero).unwrap();
        assert!((vm.sigma2(&zero, 0.3, &[2.0]) - 2.25).abs() < 1e-6);
    }

    fn fit_with_eta(a: Vec<f64>, eta_sqrt: Vec<f64>) -> DoseResponseFit {
        // zero pseudo-outcomes fit a flat zero curve, so eta_i = residual_i^2
        let n = a.len();
        let zero = vec![0.0; n];
        let rows = vec![vec![0.0]; n];
        let data = Dataset::from_rows(zero.clone(), a, &rows).unwrap();
        let mut fit = fit_causal_isotonic(
            &data,
            &OutcomeFn(|_: f64, _: &[f64]| 0.0),
            &RatioFn(|_: f64, _: &[f64]| 1.0),
            None,
        )
        .unwrap();
        fit.pseudo = PseudoOutcomes {
            xi: zero.clone(),
            residual: eta_sqrt,
            mu_bar: zero,
        };
        fit
    }

    #[test]
    fn constant_eta_gives_constant_scale() {
        let n = 2000;
        let a: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let fit = fit_with_eta(a, vec![3.0f64.sqrt(); n]);
        let k = kappa_dr(&fit, 1000.0, None).unwrap();
        assert!((k.eta_bar - 3.0).abs() < 1e-12);
        // interior point: kernel mass is one up to O(1 / (n h))
        assert!((k.value - 3.0).abs() < 3.0 * 2.0 / (n as f64 * k.bandwidth), "{k:?}");
        for h in [0.05, 0.1, 0.2] {
            let v = kappa_dr(&fit, 1000.0, Some(&[h])).unwrap().value;
            assert!((v - 3.0).abs() < 3.0 * 2.0 / (n as f64 * h));
        }
    }

    #[test]
    fn windowed_sum_matches_direct_sum() {
        let n = 300;
        let a: Vec<f64> = (0..n).map(|i| ((i * 37) % n) as f64).collect();
        let r: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let fit = fit_with_eta(a.clone(), r.clone());
        for &h in &[0.01, 0.07, 0.3] {
            let got = kappa_dr(&fit, 150.0, Some(&[h])).unwrap().value;
            let u0 = fit.rank_of(150.0);
            let direct: f64 = (0..n)
                .map(|i| {
                    let x = (fit.rank_of(a[i]) - u0) / h;
                    let k = if x.abs() < 1.0 { 0.75 * (1.0 - x * x) } else { 0.0 };
                    k / h * r[i] * r[i]
                })
                .sum::<f64>()
                / n as f64;
            assert!((got - direct).abs() < 1e-10 * (1.0 + direct.abs()), "{got} vs {direct}");
        }
    }

    #[test]
    fn default_grid_shape() {
        let g = default_kappa_grid(1000);
        assert_eq!(g.len(), 50);
        assert!((g[0] - 0.002).abs() < 1e-15);
        assert!((g[49] - 0.5).abs() < 1e-12);
    }
}
