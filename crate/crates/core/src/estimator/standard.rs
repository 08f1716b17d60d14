use super::pseudo::{cusum_by_exposure, pseudo_outcomes, PseudoOutcomes};
use super::{DoseResponseFit, Variant};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::isotonic::{gcm, PlanarPoints};
use crate::nuisance::{DensityRatioModel, OutcomeModel, RankTransform};

/// The rank-scale estimator: GCM of `{(0, 0)} U {(F_n(A_k), Gamma_n(A_k))}`
/// and its left derivative evaluated at `F_n(a)`.
///
/// With a restriction `[lo, hi]` the pseudo-outcomes are still computed on
/// the full sample, then only observations with `A_i` in the interval enter
/// the cusum diagram, whose coordinates use the restricted empirical CDF.
pub fn fit_causal_isotonic<M, G>(
    data: &Dataset,
    mu: &M,
    g: &G,
    restriction: Option<(f64, f64)>,
) -> Result<DoseResponseFit>
where
    M: OutcomeModel + ?Sized,
    G: DensityRatioModel + ?Sized,
{
    let pseudo = pseudo_outcomes(data, mu, g)?;
    match restriction {
        None => fit_from_pseudo(data.a().to_vec(), pseudo, Variant::Standard),
        Some((lo, hi)) => {
            if !(lo <= hi) {
                return Err(Error::InvalidInput(format!("empty restriction [{lo}, {hi}]")));
            }
            let keep: Vec<usize> = (0..data.len()).filter(|&i| (lo..=hi).contains(&data.a()[i])).collect();
            if keep.len() < 2 {
                return Err(Error::EmptySample(format!(
                    "{} observations in [{lo}, {hi}]",
                    keep.len()
                )));
            }
            let a = keep.iter().map(|&i| data.a()[i]).collect();
            let mut fit = fit_from_pseudo(a, pseudo.subset(&keep), Variant::Standard)?;
            fit.restriction = Some((lo, hi));
            Ok(fit)
        }
    }
}

/// Runs the cusum, GCM and left-derivative steps on precomputed
/// pseudo-outcomes, one per exposure.
pub fn fit_from_pseudo(exposures: Vec<f64>, pseudo: PseudoOutcomes, variant: Variant) -> Result<DoseResponseFit> {
    let n = exposures.len();
    let cusum = cusum_by_exposure(&exposures, &pseudo.xi)?;
    let coords: Vec<f64> = cusum.counts.iter().map(|&c| c as f64 / n as f64).collect();
    let mut x = Vec::with_capacity(coords.len() + 1);
    let mut y = Vec::with_capacity(coords.len() + 1);
    x.push(0.0);
    y.push(0.0);
    x.extend_from_slice(&coords);
    y.extend_from_slice(&cusum.gamma);
    let minorant = gcm(&PlanarPoints::new(x, y)?)?;
    let levels = left_derivatives_at(&minorant, &coords);
    Ok(DoseResponseFit {
        variant,
        support: cusum.support,
        coords,
        gamma: cusum.gamma,
        levels,
        minorant,
        ranks: RankTransform::new(&exposures)?,
        exposures,
        pseudo,
        restriction: None,
    })
}

/// Left derivative of the minorant at each (increasing) coordinate, in one
/// merged pass over the knots.
pub(crate) fn left_derivatives_at(m: &crate::isotonic::ConvexMinorant, coords: &[f64]) -> Vec<f64> {
    let knots = m.knots();
    let slopes = m.slopes();
    let mut seg = 0;
    coords
        .iter()
        .map(|&t| {
            while knots[seg + 1] < t {
                seg += 1;
            }
            slopes[seg]
        })
        .collect()
}
