use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use causal_isotonic::estimator::{
    fit_causal_isotonic, fit_cross_fitted, fit_discrete, fit_no_transform, fit_sample_split, CrossFit, DoseResponseFit,
    FoldAssignment, NuisancePair, SplitFit,
};
use causal_isotonic::inference::{
    fit_variance_model, kappa_plugin, kappa_plugin_cross_fitted, split_ci, wald_ci, ScaleEstimate, ScaleMethod,
};
use causal_isotonic::nuisance::{
    fit_gaussian_exposure, fit_level_probabilities, FittedNuisance, FittedOutcome, GaussianExposureDensity,
    LevelProbabilityModel, NuisanceSpec, RatioSpec,
};
use causal_isotonic::Dataset;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::io::{fmt, fmt_opt, Table};

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantArg {
    Standard,
    Crossfit,
    Notransform,
    Discrete,
    Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiArg {
    Plugin,
    Dr,
    Split,
}

/// Optional settings read from a TOML file. Command-line flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub artifact: Option<PathBuf>,
    pub outcome: Option<String>,
    pub exposure: Option<String>,
    pub covariates: Option<Vec<String>>,
    pub alpha: Option<f64>,
    pub grid: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub variant: Option<VariantArg>,
    pub ci: Option<CiArg>,
    pub folds: Option<usize>,
    pub splits: Option<usize>,
    pub restrict: Option<(f64, f64)>,
    pub nuisance: Option<NuisanceSpec>,
}

/// Everything a fit was run with, echoed into the artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub input: PathBuf,
    pub outcome: String,
    pub exposure: String,
    pub covariates: Vec<String>,
    pub alpha: f64,
    pub grid: Vec<f64>,
    pub seed: u64,
    pub variant: VariantArg,
    pub ci: Option<CiArg>,
    pub folds: usize,
    pub splits: usize,
    pub restrict: Option<(f64, f64)>,
    pub nuisance: NuisanceSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum FitState {
    Standard {
        fit: DoseResponseFit,
        nuisance: FittedNuisance,
    },
    Crossfit {
        fit: DoseResponseFit,
        folds: FoldAssignment,
        nuisances: Vec<FittedNuisance>,
    },
    Notransform {
        fit: DoseResponseFit,
        outcome: FittedOutcome,
        density: GaussianExposureDensity,
    },
    Discrete {
        fit: DoseResponseFit,
        outcome: FittedOutcome,
        probabilities: LevelProbabilityModel,
    },
    Split {
        split: SplitFit,
    },
}

impl FitState {
    /// The single curve, for every variant except sample splitting.
    pub fn curve(&self) -> Option<&DoseResponseFit> {
        match self {
            FitState::Standard { fit, .. }
            | FitState::Crossfit { fit, .. }
            | FitState::Notransform { fit, .. }
            | FitState::Discrete { fit, .. } => Some(fit),
            FitState::Split { .. } => None,
        }
    }

    pub fn evaluate(&self, a: f64) -> causal_isotonic::Result<f64> {
        match self {
            FitState::Split { split } => split.evaluate(a),
            _ => self.curve().expect("single curve").evaluate(a),
        }
    }
}

/// Versioned record of a fit, sufficient to recompute its intervals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitArtifact {
    pub version: u32,
    pub settings: FitSettings,
    pub data: Dataset,
    pub state: FitState,
}

impl FitArtifact {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let a: FitArtifact =
            serde_json::from_str(&text).with_context(|| format!("{}: invalid fit artifact", path.display()))?;
        if a.version != ARTIFACT_VERSION {
            bail!(
                "artifact version {} is not supported (expected {ARTIFACT_VERSION})",
                a.version
            );
        }
        Ok(a)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub a: f64,
    pub theta: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub psi_prime: Option<f64>,
    pub kappa: Option<f64>,
    pub tau: Option<f64>,
    pub method: String,
}

pub const CURVE_HEADER: &str = "a,theta,lower,upper,psi_prime,kappa,tau,method";

pub fn write_curve(rows: &[CurveRow], out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{CURVE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt(r.a),
            fmt(r.theta),
            fmt_opt(r.lower),
            fmt_opt(r.upper),
            fmt_opt(r.psi_prime),
            fmt_opt(r.kappa),
            fmt_opt(r.tau),
            r.method
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn default_ci(variant: VariantArg) -> Option<CiArg> {
    match variant {
        VariantArg::Standard | VariantArg::Crossfit => Some(CiArg::Plugin),
        VariantArg::Split => Some(CiArg::Split),
        VariantArg::Notransform | VariantArg::Discrete => None,
    }
}

fn check_ci(variant: VariantArg, ci: Option<CiArg>) -> Result<()> {
    match (variant, ci) {
        (VariantArg::Standard | VariantArg::Crossfit, Some(CiArg::Plugin | CiArg::Dr)) => Ok(()),
        (VariantArg::Split, Some(CiArg::Split)) => Ok(()),
        (_, None) => Ok(()),
        (v, Some(c)) => bail!("interval method {c:?} is not available for variant {v:?}"),
    }
}

/// Type-7 quantiles of the exposure at 5%, 10%, ..., 95%, deduplicated;
/// the distinct levels for discrete exposures.
pub fn default_grid(data: &Dataset, variant: VariantArg, restrict: Option<(f64, f64)>) -> Vec<f64> {
    let mut a: Vec<f64> = data
        .a()
        .iter()
        .copied()
        .filter(|&x| restrict.is_none_or(|(lo, hi)| lo <= x && x <= hi))
        .collect();
    a.sort_by(f64::total_cmp);
    if variant == VariantArg::Discrete {
        a.dedup();
        return a;
    }
    if a.is_empty() {
        return a;
    }
    let mut g: Vec<f64> = (1..20)
        .map(|k| {
            let h = (a.len() - 1) as f64 * k as f64 * 0.05;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(a.len() - 1);
            a[lo] + (h - lo as f64) * (a[hi] - a[lo])
        })
        .collect();
    g.dedup();
    g
}

fn ratio_covariates(spec: &NuisanceSpec) -> Vec<usize> {
    match &spec.ratio {
        RatioSpec::Uniform => Vec::new(),
        RatioSpec::LinearSlope { covariates, .. } => covariates.clone(),
    }
}

pub fn run_fit(settings: FitSettings, table: Table) -> Result<FitArtifact> {
    let data = table.data;
    check_ci(settings.variant, settings.ci)?;
    if settings.restrict.is_some() && !matches!(settings.variant, VariantArg::Standard | VariantArg::Notransform) {
        bail!("a restriction interval is only supported by the standard and notransform variants");
    }
    let spec = &settings.nuisance;
    let state = match settings.variant {
        VariantArg::Standard => {
            let nuisance = spec.fit(&data)?;
            let fit = fit_causal_isotonic(&data, &nuisance.outcome, &nuisance.ratio, settings.restrict)?;
            FitState::Standard { fit, nuisance }
        }
        VariantArg::Crossfit => {
            let folds = FoldAssignment::new(data.len(), settings.folds, settings.seed)?;
            let cf = fit_cross_fitted(&data, spec, &folds)?;
            FitState::Crossfit {
                fit: cf.fit,
                folds: cf.folds,
                nuisances: cf.nuisances,
            }
        }
        VariantArg::Notransform => {
            let outcome = spec.outcome.fit(&data)?;
            let density = fit_gaussian_exposure(&data, &ratio_covariates(spec))?;
            let (lo, hi) = match settings.restrict {
                Some(r) => r,
                None => {
                    let a = data.a();
                    let lo = a.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (lo, hi)
                }
            };
            let fit = fit_no_transform(&data, &outcome, &density, lo, hi)?;
            FitState::Notransform { fit, outcome, density }
        }
        VariantArg::Discrete => {
            let mut levels = data.a().to_vec();
            levels.sort_by(f64::total_cmp);
            levels.dedup();
            let outcome = spec.outcome.fit(&data)?;
            let probabilities = fit_level_probabilities(&data, &levels, &ratio_covariates(spec), 0.0)?;
            let fit = fit_discrete(&data, &outcome, &probabilities, &levels)?;
            FitState::Discrete {
                fit,
                outcome,
                probabilities,
            }
        }
        VariantArg::Split => {
            let split = fit_sample_split(&data, settings.splits, settings.seed, |d| {
                let nu = spec.fit(d)?;
                fit_causal_isotonic(d, &nu.outcome, &nu.ratio, None)
            })?;
            FitState::Split { split }
        }
    };
    Ok(FitArtifact {
        version: ARTIFACT_VERSION,
        settings,
        data,
        state,
    })
}

/// Wald scale at `a` for the standard and cross-fitted variants.
pub fn scale_at(art: &FitArtifact, a: f64, method: CiArg) -> Result<ScaleEstimate> {
    let data = &art.data;
    let s = match (&art.state, method) {
        (FitState::Standard { fit, .. } | FitState::Crossfit { fit, .. }, CiArg::Dr) => {
            ScaleEstimate::doubly_robust(fit, a)?
        }
        (FitState::Standard { fit, nuisance }, CiArg::Plugin) => {
            let var = fit_variance_model(data, &nuisance.outcome)?;
            let k = kappa_plugin(data, &nuisance.outcome, &nuisance.ratio, &var, a)?;
            ScaleEstimate::new(fit, a, k, ScaleMethod::Plugin, None, None)?
        }
        (FitState::Crossfit { fit, folds, nuisances }, CiArg::Plugin) => {
            let vars = nuisances
                .iter()
                .map(|nu| fit_variance_model(data, nu.outcome()))
                .collect::<causal_isotonic::Result<Vec<_>>>()?;
            let cf = CrossFit {
                fit: fit.clone(),
                folds: folds.clone(),
                nuisances: nuisances.clone(),
            };
            let k = kappa_plugin_cross_fitted(data, &cf, &vars, a)?;
            ScaleEstimate::new(fit, a, k, ScaleMethod::Plugin, None, None)?
        }
        _ => bail!("no Wald scale for this variant and interval method"),
    };
    Ok(s)
}

/// Curve rows over the stored grid, computed from the artifact alone.
/// Grid points where the curve is undefined are skipped with a warning.
pub fn curve_rows(art: &FitArtifact) -> Result<(Vec<CurveRow>, Vec<String>)> {
    let st = &art.settings;
    let mut grid = st.grid.clone();
    grid.sort_by(f64::total_cmp);
    let mut rows = Vec::with_capacity(grid.len());
    let mut warnings = Vec::new();
    let label = |c: Option<CiArg>| match c {
        Some(CiArg::Plugin) => "plugin",
        Some(CiArg::Dr) => "dr",
        Some(CiArg::Split) => "split",
        None => "none",
    };
    for &a in &grid {
        let theta = match art.state.evaluate(a) {
            Ok(t) => t,
            Err(e) => {
                warnings.push(format!("a={a}: skipped ({e})"));
                continue;
            }
        };
        let mut row = CurveRow {
            a,
            theta,
            lower: None,
            upper: None,
            psi_prime: None,
            kappa: None,
            tau: None,
            method: label(st.ci).to_string(),
        };
        match (st.ci, &art.state) {
            (None, _) => {}
            (Some(CiArg::Split), FitState::Split { split }) => match split_ci(split, a, st.alpha) {
                Ok(ci) => {
                    row.lower = Some(ci.lower);
                    row.upper = Some(ci.upper);
                }
                Err(e) => warnings.push(format!("a={a}: no interval ({e})")),
            },
            (Some(m), state) => {
                let fit = state.curve().expect("Wald intervals need a single curve");
                match scale_at(art, a, m).and_then(|s| Ok((wald_ci(fit, a, st.alpha, &s)?, s))) {
                    Ok((ci, s)) => {
                        row.lower = Some(ci.lower);
                        row.upper = Some(ci.upper);
                        row.psi_prime = Some(s.psi_prime);
                        row.kappa = Some(s.kappa);
                        row.tau = Some(s.tau);
                        if s.psi_prime_floored {
                            warnings.push(format!("a={a}: derivative estimate floored at zero"));
                        }
                    }
                    Err(e) => warnings.push(format!("a={a}: no interval ({e})")),
                }
            }
        }
        rows.push(row);
    }
    Ok((rows, warnings))
}

/// Maps covariate names to indices in the loaded covariate list.
pub fn covariate_indices(all: &[String], names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            all.iter()
                .position(|c| c == n)
                .with_context(|| format!("'{n}' is not among the covariates ({})", all.join(", ")))
        })
        .collect()
}
