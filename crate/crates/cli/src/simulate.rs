use std::path::Path;

use anyhow::{Context, Result};
use causal_isotonic::simulation::{Arm, CiMethod, DgpConfig, EstimatorKind, ExperimentConfig, MetricsRow};
use serde::{Deserialize, Serialize};

/// Simulation settings file. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub ns: Vec<usize>,
    pub reps: usize,
    pub grid: Option<Vec<f64>>,
    pub arms: Option<Vec<Arm>>,
    pub estimators: Option<Vec<EstimatorKind>>,
    pub ci_methods: Option<Vec<CiMethod>>,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub folds: Option<usize>,
    pub splits: Option<usize>,
    pub dgp: Option<DgpConfig>,
}

impl SimConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("{}: invalid simulation config", path.display()))
    }

    pub fn experiment(&self) -> ExperimentConfig {
        let d = ExperimentConfig::default();
        ExperimentConfig {
            dgp: self.dgp.clone().unwrap_or(d.dgp),
            sample_sizes: self.ns.clone(),
            replications: self.reps,
            grid: self.grid.clone().unwrap_or(d.grid),
            arms: self.arms.clone().unwrap_or(d.arms),
            estimators: self.estimators.clone().unwrap_or(d.estimators),
            ci_methods: self.ci_methods.clone().unwrap_or(d.ci_methods),
            alpha: self.alpha.unwrap_or(d.alpha),
            seed: self.seed.unwrap_or(d.seed),
            folds: self.folds.unwrap_or(d.folds),
            splits: self.splits.unwrap_or(d.splits),
        }
    }
}

pub fn summary_line(r: &MetricsRow) -> String {
    format!(
        "{}/{} {} n={} a={}: bias={:.4} se={:.4} coverage={:.3} width={:.4} reps={} failures={}",
        r.estimator,
        r.ci_method,
        r.arm.label(),
        r.n,
        r.a,
        r.bias,
        r.se,
        r.coverage,
        r.width,
        r.reps,
        r.failures
    )
}
