//! Command-line front end: `fit`, `simulate`, `chernoff` and `effect`.

// `!(x < y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod fit;
pub mod io;
pub mod simulate;

use std::io::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use causal_isotonic::inference::{
    effect_ci, regenerate_table, ChernoffTable, RegenerationConfig, DEFAULT_EFFECT_DRAWS,
};
use causal_isotonic::nuisance::{ExposureScale, NuisanceSpec, OutcomeFeatures, OutcomeSpec, RatioSpec};
use causal_isotonic::simulation::{run_experiment, write_metrics_csv};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fit::{
    covariate_indices, curve_rows, default_ci, default_grid, run_fit, scale_at, write_curve, CiArg, FitArtifact,
    FitConfig, FitSettings, FitState, VariantArg,
};
use simulate::{summary_line, SimConfig};

pub const THREADS_ENV: &str = "CAUSAL_ISO_THREADS";
pub const DEFAULT_SEED: u64 = 20_190_101;

#[derive(Debug, Parser)]
#[command(
    name = "causal-iso",
    version,
    about = "Monotone causal dose-response curves with Chernoff intervals"
)]
pub struct Cli {
    /// Worker threads (defaults to $CAUSAL_ISO_THREADS, then all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Fit a curve from a CSV file and write pointwise intervals
    Fit(FitArgs),
    /// Run a replicated simulation study and write its metrics
    Simulate(SimulateArgs),
    /// Print or regenerate the Chernoff quantile table
    Chernoff(ChernoffArgs),
    /// Interval for theta(a1) - theta(a2) from a saved fit
    Effect(EffectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MuModel {
    Auto,
    Logistic,
    Linear,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GModel {
    LinearSlope,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    Rank,
    Raw,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input CSV with a header row
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// TOML file with fit settings; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Curve CSV (standard output if omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON fit artifact for later `effect` runs
    #[arg(long)]
    pub artifact: Option<PathBuf>,
    /// Outcome column [default: y]
    #[arg(long)]
    pub outcome: Option<String>,
    /// Exposure column [default: a]
    #[arg(long)]
    pub exposure: Option<String>,
    /// Comma-separated covariate columns (default: all other columns)
    #[arg(long)]
    pub covariates: Option<String>,
    /// Interval level is 1 - alpha [default: 0.05]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// `lo:hi:count` or a comma-separated list, written out in sorted order
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Seed for fold and split assignment
    #[arg(long)]
    pub seed: Option<u64>,
    /// Estimator [default: standard]
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Interval method [default: plugin, or split for the split variant]
    #[arg(long, value_enum)]
    pub ci: Option<CiArg>,
    /// Cross-fitting folds [default: 10]
    #[arg(long)]
    pub folds: Option<usize>,
    /// Sample splits [default: 5]
    #[arg(long)]
    pub splits: Option<usize>,
    /// Restrict to `lo,hi`
    #[arg(long, allow_hyphen_values = true)]
    pub restrict: Option<String>,
    /// Outcome regression; auto picks logistic for 0/1 outcomes [default: auto]
    #[arg(long, value_enum)]
    pub mu_model: Option<MuModel>,
    /// Exposure scale of the outcome regression [default: rank]
    #[arg(long, value_enum)]
    pub mu_scale: Option<Scale>,
    /// Comma-separated covariates of the outcome regression
    #[arg(long)]
    pub mu_covariates: Option<String>,
    /// Drop exposure-by-covariate interactions from the outcome regression
    #[arg(long)]
    pub no_interactions: bool,
    /// Density-ratio model [default: linear-slope]
    #[arg(long, value_enum)]
    pub g_model: Option<GModel>,
    /// Comma-separated covariates of the exposure model
    #[arg(long)]
    pub g_covariates: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML file: ns, reps, grid, arms, estimators, ci_methods, alpha, seed, threads, folds, splits, dgp
    #[arg(long)]
    pub config: PathBuf,
    /// Metrics CSV (standard output if omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the seed in the config
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ChernoffArgs {
    /// Simulate a new table instead of printing the embedded one
    #[arg(long)]
    pub regenerate: bool,
    /// Brownian paths for regeneration
    #[arg(long, default_value_t = 1_000_000)]
    pub paths: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Table file (standard output if omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EffectArgs {
    /// Artifact written by `fit --artifact`
    #[arg(long)]
    pub artifact: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub a1: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub a2: f64,
    /// Defaults to the alpha the fit was run with
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Monte Carlo draws
    #[arg(long, default_value_t = DEFAULT_EFFECT_DRAWS)]
    pub draws: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// `--threads`, then the config value, then the environment variable.
pub fn thread_count(flag: Option<usize>, config: Option<usize>) -> Result<Option<usize>> {
    if let Some(t) = flag.or(config) {
        return Ok(Some(t));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => Ok(Some(
            v.trim()
                .parse()
                .with_context(|| format!("{THREADS_ENV}='{v}' is not a count"))?,
        )),
        Err(_) => Ok(None),
    }
}

fn init_threads(n: Option<usize>) -> Result<()> {
    if let Some(n) = n {
        if n == 0 {
            bail!("thread count must be positive");
        }
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(args) => {
            init_threads(thread_count(cli.threads, None)?)?;
            cmd_fit(args)
        }
        Command::Simulate(args) => {
            let cfg = SimConfig::load(&args.config)?;
            init_threads(thread_count(cli.threads, cfg.threads)?)?;
            cmd_simulate(args, cfg)
        }
        Command::Chernoff(args) => {
            init_threads(thread_count(cli.threads, None)?)?;
            cmd_chernoff(args)
        }
        Command::Effect(args) => cmd_effect(args),
    }
}

fn resolve_nuisance(args: &FitArgs, cfg: &FitConfig, table: &io::Table) -> Result<NuisanceSpec> {
    let flags_given = args.mu_model.is_some()
        || args.mu_scale.is_some()
        || args.mu_covariates.is_some()
        || args.no_interactions
        || args.g_model.is_some()
        || args.g_covariates.is_some();
    if let (Some(spec), false) = (&cfg.nuisance, flags_given) {
        return Ok(spec.clone());
    }
    let all: Vec<usize> = (0..table.covariates.len()).collect();
    let pick = |s: &Option<String>| -> Result<Vec<usize>> {
        match s {
            Some(s) => covariate_indices(&table.covariates, &io::parse_list(s)),
            None => Ok(all.clone()),
        }
    };
    let features = OutcomeFeatures {
        covariates: pick(&args.mu_covariates)?,
        interactions: !args.no_interactions,
        quadratic: true,
    };
    let scale = match args.mu_scale.unwrap_or(Scale::Rank) {
        Scale::Rank => ExposureScale::Rank,
        Scale::Raw => ExposureScale::Raw,
    };
    let logistic = match args.mu_model.unwrap_or(MuModel::Auto) {
        MuModel::Constant => None,
        MuModel::Logistic => Some(true),
        MuModel::Linear => Some(false),
        MuModel::Auto => Some(table.data.binary_outcome()),
    };
    let outcome = match logistic {
        None => OutcomeSpec::Constant,
        Some(true) => OutcomeSpec::Logistic {
            features,
            scale,
            ridge: 0.0,
        },
        Some(false) => OutcomeSpec::Linear {
            features,
            scale,
            ridge: 0.0,
            bound: None,
        },
    };
    let ratio = match args.g_model.unwrap_or(GModel::LinearSlope) {
        GModel::Uniform => RatioSpec::Uniform,
        GModel::LinearSlope => RatioSpec::LinearSlope {
            covariates: pick(&args.g_covariates)?,
            intercept: true,
        },
    };
    let mut spec = NuisanceSpec::new(outcome, ratio);
    if let Some(c) = &cfg.nuisance {
        spec.clamp = c.clamp;
    }
    Ok(spec)
}

pub fn cmd_fit(args: FitArgs) -> Result<()> {
    let cfg: FitConfig = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("{}: invalid fit config", p.display()))?
        }
        None => FitConfig::default(),
    };
    let input = args
        .input
        .clone()
        .or(cfg.input.clone())
        .context("no input file (use --input or 'input' in the config)")?;
    let outcome = args
        .outcome
        .clone()
        .or(cfg.outcome.clone())
        .unwrap_or_else(|| "y".into());
    let exposure = args
        .exposure
        .clone()
        .or(cfg.exposure.clone())
        .unwrap_or_else(|| "a".into());
    let covariates = args
        .covariates
        .as_deref()
        .map(io::parse_list)
        .or(cfg.covariates.clone());
    let table = io::read_table(&input, &outcome, &exposure, covariates.as_deref())?;

    let variant = args.variant.or(cfg.variant).unwrap_or(VariantArg::Standard);
    let restrict = match &args.restrict {
        Some(s) => Some(io::parse_pair(s)?),
        None => cfg.restrict,
    };
    let grid = match &args.grid {
        Some(s) => io::parse_grid(s)?,
        None => cfg
            .grid
            .clone()
            .unwrap_or_else(|| default_grid(&table.data, variant, restrict)),
    };
    let (lo, hi) = table
        .data
        .a()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    if grid.iter().any(|&g| g < lo || g > hi) {
        eprintln!("warning: grid extends beyond the observed exposure range [{lo}, {hi}]");
    }
    let settings = FitSettings {
        input,
        outcome,
        exposure,
        covariates: table.covariates.clone(),
        alpha: args.alpha.or(cfg.alpha).unwrap_or(0.05),
        grid,
        seed: args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
        variant,
        ci: args.ci.or(cfg.ci).or(default_ci(variant)),
        folds: args.folds.or(cfg.folds).unwrap_or(10),
        splits: args.splits.or(cfg.splits).unwrap_or(5),
        restrict,
        nuisance: resolve_nuisance(&args, &cfg, &table)?,
    };
    if !(settings.alpha > 0.0 && settings.alpha < 1.0) {
        bail!("alpha must lie in (0, 1), got {}", settings.alpha);
    }
    let art = run_fit(settings, table)?;
    let (rows, warnings) = curve_rows(&art)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let out_path = args.out.clone().or(cfg.out.clone());
    write_curve(&rows, &mut io::output(out_path.as_deref())?)?;
    if let Some(p) = args.artifact.clone().or(cfg.artifact.clone()) {
        art.save(&p)?;
    }
    Ok(())
}

pub fn cmd_simulate(args: SimulateArgs, mut cfg: SimConfig) -> Result<()> {
    if let Some(s) = args.seed {
        cfg.seed = Some(s);
    }
    let rows = run_experiment(&cfg.experiment())?;
    for r in &rows {
        eprintln!("{}", summary_line(r));
    }
    write_metrics_csv(&rows, io::output(args.out.as_deref())?)?;
    Ok(())
}

pub fn cmd_chernoff(args: ChernoffArgs) -> Result<()> {
    let table = if args.regenerate {
        regenerate_table(&RegenerationConfig {
            paths: args.paths,
            seed: args.seed,
            ..RegenerationConfig::default()
        })?
    } else {
        ChernoffTable::embedded().clone()
    };
    eprintln!("implied standard deviation: {:.6}", table.implied_sd());
    let mut out = io::output(args.out.as_deref())?;
    out.write_all(table.to_text().as_bytes())?;
    out.flush()?;
    Ok(())
}

/// Effect interval computed from a saved fit.
pub fn effect_from_artifact(
    art: &FitArtifact,
    a1: f64,
    a2: f64,
    alpha: f64,
    draws: usize,
    seed: u64,
) -> Result<causal_isotonic::inference::ConfidenceInterval> {
    let method = match art.settings.ci {
        Some(m @ (CiArg::Plugin | CiArg::Dr)) => m,
        _ => CiArg::Plugin,
    };
    let fit = match &art.state {
        FitState::Standard { fit, .. } | FitState::Crossfit { fit, .. } => fit,
        _ => bail!("effect intervals need a standard or cross-fitted fit"),
    };
    let (lo, hi) = (fit.support[0], *fit.support.last().expect("non-empty support"));
    for a in [a1, a2] {
        if !(lo..=hi).contains(&a) {
            bail!("point {a} is outside the fitted exposure range [{lo}, {hi}]");
        }
    }
    let s1 = scale_at(art, a1, method)?;
    let s2 = scale_at(art, a2, method)?;
    Ok(effect_ci(fit, a1, a2, alpha, &s1, &s2, draws, seed)?)
}

pub fn cmd_effect(args: EffectArgs) -> Result<()> {
    let art = FitArtifact::load(&args.artifact)?;
    let alpha = args.alpha.unwrap_or(art.settings.alpha);
    let ci = effect_from_artifact(&art, args.a1, args.a2, alpha, args.draws, args.seed)?;
    if let Some(note) = &ci.note {
        eprintln!("warning: {note}");
    }
    let mut out = io::output(args.out.as_deref())?;
    writeln!(out, "a1,a2,estimate,lower,upper")?;
    writeln!(
        out,
        "{},{},{},{},{}",
        io::fmt(args.a1),
        io::fmt(args.a2),
        io::fmt(ci.estimate),
        io::fmt(ci.lower),
        io::fmt(ci.upper)
    )?;
    out.flush()?;
    Ok(())
}
