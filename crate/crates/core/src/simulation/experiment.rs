use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baseline::LocalLinear;
use super::dgp::DgpConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{
    fit_causal_isotonic, fit_cross_fitted, fit_sample_split, DoseResponseFit, FoldAssignment, NuisancePair as _,
};
use crate::inference::{
    fit_variance_model, kappa_plugin, kappa_plugin_cross_fitted, split_ci, wald_ci, ConfidenceInterval, ScaleEstimate,
    ScaleMethod,
};
use crate::nuisance::{ExposureScale, NuisanceSpec, OutcomeFeatures, OutcomeSpec, RatioSpec};

/// Which nuisance regressions are correctly specified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    BothCorrect,
    /// Outcome regression correct, density ratio misspecified.
    MuOnly,
    /// Density ratio correct, outcome regression misspecified.
    GOnly,
    BothWrong,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::BothCorrect, Arm::MuOnly, Arm::GOnly, Arm::BothWrong];

    pub fn mu_correct(self) -> bool {
        matches!(self, Arm::BothCorrect | Arm::MuOnly)
    }

    pub fn g_correct(self) -> bool {
        matches!(self, Arm::BothCorrect | Arm::GOnly)
    }

    pub fn label(self) -> &'static str {
        match self {
            Arm::BothCorrect => "both_correct",
            Arm::MuOnly => "mu_only",
            Arm::GOnly => "g_only",
            Arm::BothWrong => "both_wrong",
        }
    }

    /// Parametric nuisances for the simulation design. The misspecified
    /// outcome regression drops `W3`, `W4` and every exposure interaction; the
    /// misspecified density drops `W3` and `W4`.
    pub fn nuisance_spec(self) -> NuisanceSpec {
        let features = if self.mu_correct() {
            OutcomeFeatures::full(DgpConfig::DIM)
        } else {
            OutcomeFeatures {
                covariates: vec![0, 1],
                interactions: false,
                quadratic: true,
            }
        };
        let outcome = OutcomeSpec::Logistic {
            features,
            scale: ExposureScale::Raw,
            ridge: 0.0,
        };
        let covariates = if self.g_correct() { vec![0, 1, 2, 3] } else { vec![0, 1] };
        NuisanceSpec::new(
            outcome,
            RatioSpec::LinearSlope {
                covariates,
                intercept: true,
            },
        )
    }
}

/// Config names are snake_case; the labels written to metrics files are
/// accepted as aliases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    #[serde(alias = "causal_isotonic")]
    Standard,
    CrossFitted,
    SampleSplit,
    /// Non-faithful comparison baseline.
    #[serde(alias = "local_linear_baseline")]
    LocalLinear,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Standard => "causal_isotonic",
            EstimatorKind::CrossFitted => "cross_fitted",
            EstimatorKind::SampleSplit => "sample_split",
            EstimatorKind::LocalLinear => "local_linear_baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Plugin,
    Dr,
}

impl CiMethod {
    pub fn label(self) -> &'static str {
        match self {
            CiMethod::Plugin => "plugin",
            CiMethod::Dr => "dr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dgp: DgpConfig,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub grid: Vec<f64>,
    pub arms: Vec<Arm>,
    pub estimators: Vec<EstimatorKind>,
    /// Wald scale estimators used by the standard and cross-fitted curves.
    /// The split estimator always uses its t-interval, the baseline its
    /// sandwich interval.
    pub ci_methods: Vec<CiMethod>,
    pub alpha: f64,
    pub seed: u64,
    pub folds: usize,
    pub splits: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dgp: DgpConfig::default(),
            sample_sizes: vec![500, 1000, 2500, 5000],
            replications: 1000,
            grid: (0..13).map(|k| -3.0 + 0.5 * k as f64).collect(),
            arms: Arm::ALL.to_vec(),
            estimators: vec![EstimatorKind::Standard, EstimatorKind::CrossFitted],
            ci_methods: vec![CiMethod::Plugin, CiMethod::Dr],
            alpha: 0.05,
            seed: 20_190_101,
            folds: 10,
            splits: 5,
        }
    }
}

/// One interval from one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl From<ConfidenceInterval> for Interval {
    fn from(ci: ConfidenceInterval) -> Self {
        Self {
            estimate: ci.estimate,
            lower: ci.lower,
            upper: ci.upper,
        }
    }
}

/// A procedure evaluated once per (replication, arm). It may report several
/// outputs, for instance one curve with two interval methods.
pub trait ReplicationEstimator: Sync {
    /// `(estimator, ci_method)` label of each output.
    fn outputs(&self) -> Vec<(String, String)>;

    /// One vector per output with one entry per grid point; `None` marks a
    /// failed evaluation. An `Err` fails every output of the replication.
    fn run(&self, data: &Dataset, arm: Arm, grid: &[f64], alpha: f64, seed: u64) -> Result<Vec<Vec<Option<Interval>>>>;
}

/// Standard, cross-fitted, sample-split or local-linear curves with the
/// parametric nuisances of the arm.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinEstimator {
    pub kind: EstimatorKind,
    pub ci_methods: Vec<CiMethod>,
    pub folds: usize,
    pub splits: usize,
}

fn wald(fit: &DoseResponseFit, a: f64, alpha: f64, kappa: Result<f64>, method: ScaleMethod) -> Option<Interval> {
    let s = ScaleEstimate::new(fit, a, kappa.ok()?, method, None, None).ok()?;
    wald_ci(fit, a, alpha, &s).ok().map(Into::into)
}

fn dr(fit: &DoseResponseFit, a: f64, alpha: f64) -> Option<Interval> {
    let s = ScaleEstimate::doubly_robust(fit, a).ok()?;
    wald_ci(fit, a, alpha, &s).ok().map(Into::into)
}

impl ReplicationEstimator for BuiltinEstimator {
    fn outputs(&self) -> Vec<(String, String)> {
        let name = self.kind.label().to_string();
        match self.kind {
            EstimatorKind::Standard | EstimatorKind::CrossFitted => self
                .ci_methods
                .iter()
                .map(|c| (name.clone(), c.label().to_string()))
                .collect(),
            EstimatorKind::SampleSplit => vec![(name, "split".into())],
            EstimatorKind::LocalLinear => vec![(name, "sandwich".into())],
        }
    }

    fn run(&self, data: &Dataset, arm: Arm, grid: &[f64], alpha: f64, seed: u64) -> Result<Vec<Vec<Option<Interval>>>> {
        let spec = arm.nuisance_spec();
        match self.kind {
            EstimatorKind::Standard => {
                let nu = spec.fit(data)?;
                let fit = fit_causal_isotonic(data, &nu.outcome, &nu.ratio, None)?;
                let var = fit_variance_model(data, &nu.outcome)?;
                Ok(self
                    .ci_methods
                    .iter()
                    .map(|m| {
                        grid.iter()
                            .map(|&a| match m {
                                CiMethod::Plugin => {
                                    let k = kappa_plugin(data, &nu.outcome, &nu.ratio, &var, a);
                                    wald(&fit, a, alpha, k, ScaleMethod::Plugin)
                                }
                                CiMethod::Dr => dr(&fit, a, alpha),
                            })
                            .collect()
                    })
                    .collect())
            }
            EstimatorKind::CrossFitted => {
                let folds = FoldAssignment::new(data.len(), self.folds, seed)?;
                let cf = fit_cross_fitted(data, &spec, &folds)?;
                let vars = cf
                    .nuisances
                    .iter()
                    .map(|nu| fit_variance_model(data, nu.outcome()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(self
                    .ci_methods
                    .iter()
                    .map(|m| {
                        grid.iter()
                            .map(|&a| match m {
                                CiMethod::Plugin => {
                                    let k = kappa_plugin_cross_fitted(data, &cf, &vars, a);
                                    wald(&cf.fit, a, alpha, k, ScaleMethod::Plugin)
                                }
                                CiMethod::Dr => dr(&cf.fit, a, alpha),
                            })
                            .collect()
                    })
                    .collect())
            }
            EstimatorKind::SampleSplit => {
                let split = fit_sample_split(data, self.splits, seed, |d| {
                    let nu = spec.fit(d)?;
                    fit_causal_isotonic(d, &nu.outcome, &nu.ratio, None)
                })?;
                Ok(vec![grid
                    .iter()
                    .map(|&a| split_ci(&split, a, alpha).ok().map(Into::into))
                    .collect()])
            }
            EstimatorKind::LocalLinear => {
                let nu = spec.fit(data)?;
                let fit = fit_causal_isotonic(data, &nu.outcome, &nu.ratio, None)?;
                let ll = LocalLinear::fit(data.a(), &fit.pseudo.xi, 15)?;
                Ok(vec![grid
                    .iter()
                    .map(|&a| {
                        ll.interval(a, alpha)
                            .ok()
                            .map(|(estimate, lower, upper)| Interval { estimate, lower, upper })
                    })
                    .collect()])
            }
        }
    }
}

/// Reports the true curve with a zero-width interval. Used to check the
/// metric bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleEstimator {
    pub dgp: DgpConfig,
}

impl ReplicationEstimator for OracleEstimator {
    fn outputs(&self) -> Vec<(String, String)> {
        vec![("oracle".into(), "exact".into())]
    }

    fn run(&self, _: &Dataset, _: Arm, grid: &[f64], _: f64, _: u64) -> Result<Vec<Vec<Option<Interval>>>> {
        Ok(vec![grid
            .iter()
            .map(|&a| {
                let t = self.dgp.true_theta(a);
                Some(Interval {
                    estimate: t,
                    lower: t,
                    upper: t,
                })
            })
            .collect()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub estimator: String,
    pub ci_method: String,
    pub arm: Arm,
    pub n: usize,
    pub a: f64,
    pub bias: f64,
    pub se: f64,
    pub coverage: f64,
    pub width: f64,
    pub reps: usize,
    pub failures: usize,
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Seed for one unit of work, drawn from a ChaCha stream indexed by `stream`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng.next_u64()
}

fn builtin_estimators(cfg: &ExperimentConfig) -> Vec<BuiltinEstimator> {
    cfg.estimators
        .iter()
        .map(|&kind| BuiltinEstimator {
            kind,
            ci_methods: cfg.ci_methods.clone(),
            folds: cfg.folds,
            splits: cfg.splits,
        })
        .collect()
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    let ests = builtin_estimators(cfg);
    let refs: Vec<&dyn ReplicationEstimator> = ests.iter().map(|e| e as &dyn ReplicationEstimator).collect();
    run_experiment_with(cfg, &refs)
}

type RepOutput = Vec<Vec<Vec<Vec<Option<Interval>>>>>;

/// Runs every estimator on shared datasets. Replication `r` at the `k`-th
/// sample size uses the data seed `derive_seed(seed, (r << 8) | k)`, so all
/// arms and estimators see the same data and the result does not depend on
/// scheduling.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    estimators: &[&dyn ReplicationEstimator],
) -> Result<Vec<MetricsRow>> {
    if cfg.replications == 0 {
        return Err(Error::InvalidInput("replication count is zero".into()));
    }
    if cfg.sample_sizes.is_empty() || cfg.grid.is_empty() || cfg.arms.is_empty() || estimators.is_empty() {
        return Err(Error::InvalidInput(
            "sample sizes, grid, arms and estimators must be non-empty".into(),
        ));
    }
    if cfg.sample_sizes.len() > 256 {
        return Err(Error::InvalidInput("at most 256 sample sizes".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::InvalidInput(format!(
            "alpha must lie in (0, 1), got {}",
            cfg.alpha
        )));
    }
    let truth: Vec<f64> = cfg.grid.iter().map(|&a| cfg.dgp.true_theta(a)).collect();
    let outputs: Vec<Vec<(String, String)>> = estimators.iter().map(|e| e.outputs()).collect();

    let mut rows = Vec::new();
    for (k, &n) in cfg.sample_sizes.iter().enumerate() {
        // results[rep][arm][estimator][output][a]
        let results: Vec<RepOutput> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let seed = derive_seed(cfg.seed, ((r as u64) << 8) | k as u64);
                let data = cfg.dgp.generate(n, seed);
                cfg.arms
                    .iter()
                    .map(|&arm| {
                        estimators
                            .iter()
                            .zip(&outputs)
                            .enumerate()
                            .map(|(e, (est, outs))| {
                                let run = data.as_ref().map_err(Clone::clone).and_then(|d| {
                                    est.run(d, arm, &cfg.grid, cfg.alpha, derive_seed(seed, 1 + e as u64))
                                });
                                match run {
                                    Ok(v) if v.len() == outs.len() && v.iter().all(|x| x.len() == cfg.grid.len()) => v,
                                    _ => vec![vec![None; cfg.grid.len()]; outs.len()],
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();

        for (ai, &arm) in cfg.arms.iter().enumerate() {
            for (e, outs) in outputs.iter().enumerate() {
                for (o, (name, ci)) in outs.iter().enumerate() {
                    for (g, &a) in cfg.grid.iter().enumerate() {
                        let cells: Vec<Interval> = results.iter().filter_map(|rep| rep[ai][e][o][g]).collect();
                        rows.push(summarize(name, ci, arm, n, a, truth[g], &cells, cfg.replications));
                    }
                }
            }
        }
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    name: &str,
    ci: &str,
    arm: Arm,
    n: usize,
    a: f64,
    truth: f64,
    cells: &[Interval],
    total: usize,
) -> MetricsRow {
    let reps = cells.len();
    let m = reps as f64;
    let (bias, se, coverage, width) = if reps == 0 {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    } else {
        let mean = cells.iter().map(|c| c.estimate).sum::<f64>() / m;
        let se = if reps > 1 {
            (cells.iter().map(|c| (c.estimate - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
        } else {
            0.0
        };
        let cover = cells.iter().filter(|c| c.lower <= truth && truth <= c.upper).count() as f64 / m;
        let width = cells.iter().map(|c| c.upper - c.lower).sum::<f64>() / m;
        (mean - truth, se, cover, width)
    };
    MetricsRow {
        estimator: name.to_string(),
        ci_method: ci.to_string(),
        arm,
        n,
        a,
        bias,
        se,
        coverage,
        width,
        reps,
        failures: total - reps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            sample_sizes: vec![200],
            replications: 4,
            grid: vec![-1.0, 0.0, 1.0],
            arms: vec![Arm::BothCorrect, Arm::GOnly],
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn zero_replications_is_an_error() {
        let cfg = ExperimentConfig {
            replications: 0,
            ..small()
        };
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn oracle_stub_has_no_error() {
        let cfg = small();
        let oracle = OracleEstimator { dgp: cfg.dgp.clone() };
        let rows = run_experiment_with(&cfg, &[&oracle]).unwrap();
        assert_eq!(rows.len(), 2 * 3);
        for r in rows {
            assert_eq!((r.bias, r.se, r.coverage, r.width), (0.0, 0.0, 1.0, 0.0));
            assert_eq!((r.reps, r.failures), (4, 0));
        }
    }

    #[test]
    fn arms_share_data_and_rows_are_reproducible() {
        let cfg = small();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.len(), 2 * 2 * 2 * 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.estimator, y.estimator);
            assert!(x.bias.to_bits() == y.bias.to_bits() || (x.bias.is_nan() && y.bias.is_nan()));
        }
    }

    #[test]
    fn misspecified_specs_drop_covariates() {
        let s = Arm::GOnly.nuisance_spec();
        match s.outcome {
            OutcomeSpec::Logistic { features, .. } => {
                assert_eq!(features.covariates, vec![0, 1]);
                assert!(!features.interactions);
            }
            _ => panic!(),
        }
        match Arm::MuOnly.nuisance_spec().ratio {
            RatioSpec::LinearSlope { covariates, .. } => assert_eq!(covariates, vec![0, 1]),
            _ => panic!(),
        }
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        let row = summarize("e", "plugin", Arm::BothCorrect, 10, 0.0, 0.5, &[], 3);
        write_metrics_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("estimator,ci_method,arm,n,a,bias,se,coverage,width,reps,failures\n"));
        assert!(text.contains("both_correct"));
    }
}
