use super::pseudo::PseudoOutcomes;
use super::standard::left_derivatives_at;
use super::{DoseResponseFit, Variant};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::isotonic::{gcm, PlanarPoints};
use crate::nuisance::{ConditionalDensity, OutcomeModel, RankTransform};

/// Grenander-type estimator on the raw exposure scale over `[a_minus, a_plus]`.
///
/// `Theta_n(a) = (1/n) sum_i { I(a_- < A_i <= a) (Y_i - mu(A_i, W_i)) / pi(A_i | W_i)
///                            + int_{a_-}^{a} mu(u, W_i) du }`
/// is evaluated at each distinct sample exposure in `(a_-, a_+]`, with the
/// integral taken by the trapezoid rule over `a_-` and those exposures. The
/// curve is the left derivative of the GCM of `{(a_-, 0)} U {(A_k, Theta_n(A_k))}`.
pub fn fit_no_transform<M, P>(data: &Dataset, mu: &M, pi: &P, a_minus: f64, a_plus: f64) -> Result<DoseResponseFit>
where
    M: OutcomeModel + ?Sized,
    P: ConditionalDensity + ?Sized,
{
    if !(a_minus < a_plus) || !a_minus.is_finite() || !a_plus.is_finite() {
        return Err(Error::InvalidInput(format!(
            "need finite a_minus < a_plus, got [{a_minus}, {a_plus}]"
        )));
    }
    let n = data.len();
    let keep: Vec<usize> = (0..n)
        .filter(|&i| data.a()[i] > a_minus && data.a()[i] <= a_plus)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptySample(format!("no exposures in ({a_minus}, {a_plus}]")));
    }

    let mut residual = Vec::with_capacity(keep.len());
    for &i in &keep {
        let (a, w) = (data.a()[i], data.w(i));
        let m = mu.predict(a, w);
        let p = pi.density(a, w);
        if !m.is_finite() || !p.is_finite() {
            return Err(Error::NonFinite(format!("nuisance evaluation at observation {i}")));
        }
        if p <= 0.0 {
            return Err(Error::NonPositiveWeight(i));
        }
        residual.push((data.y()[i] - m) / p);
    }

    let mut order: Vec<usize> = (0..keep.len()).collect();
    order.sort_by(|&x, &y| data.a()[keep[x]].total_cmp(&data.a()[keep[y]]));

    let mbar = |t: f64| (0..n).map(|j| mu.predict(t, data.w(j))).sum::<f64>() / n as f64;
    let mut support = Vec::new();
    let mut theta_cap = Vec::new();
    let mut mbar_at = Vec::new();
    let mut resid_sum = 0.0;
    let mut integral = 0.0;
    let mut prev_t = a_minus;
    let mut prev_m = mbar(a_minus);
    for &k in &order {
        let t = data.a()[keep[k]];
        resid_sum += residual[k];
        if support.last() == Some(&t) {
            *theta_cap.last_mut().unwrap() = resid_sum / n as f64 + integral;
            continue;
        }
        let m = mbar(t);
        integral += 0.5 * (t - prev_t) * (prev_m + m);
        prev_t = t;
        prev_m = m;
        support.push(t);
        mbar_at.push(m);
        theta_cap.push(resid_sum / n as f64 + integral);
    }

    let mut x = vec![a_minus];
    let mut y = vec![0.0];
    x.extend_from_slice(&support);
    y.extend_from_slice(&theta_cap);
    let minorant = gcm(&PlanarPoints::new(x, y)?)?;
    let levels = left_derivatives_at(&minorant, &support);

    let exposures: Vec<f64> = keep.iter().map(|&i| data.a()[i]).collect();
    let mu_bar: Vec<f64> = exposures
        .iter()
        .map(|&a| mbar_at[support.partition_point(|&s| s < a)])
        .collect();
    let xi = residual.iter().zip(&mu_bar).map(|(r, m)| r + m).collect();
    Ok(DoseResponseFit {
        variant: Variant::NoTransform,
        support: support.clone(),
        coords: support,
        gamma: theta_cap,
        levels,
        minorant,
        ranks: RankTransform::new(&exposures)?,
        exposures,
        pseudo: PseudoOutcomes { xi, residual, mu_bar },
        restriction: Some((a_minus, a_plus)),
    })
}
