use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use causal_isotonic::Dataset;

/// Columns pulled out of an input table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub data: Dataset,
    pub covariates: Vec<String>,
}

/// Reads `outcome`, `exposure` and the covariate columns from a headed CSV.
/// With `covariates = None` every other column is a covariate. Row numbers
/// in errors count data rows from 1.
pub fn read_table(path: &Path, outcome: &str, exposure: &str, covariates: Option<&[String]>) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("missing column '{name}' (available: {})", header.join(", ")))
    };
    let yi = find(outcome)?;
    let ai = find(exposure)?;
    let cov_names: Vec<String> = match covariates {
        Some(c) => c.to_vec(),
        None => header
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != yi && j != ai)
            .map(|(_, h)| h.clone())
            .collect(),
    };
    let wi = cov_names.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;

    let (mut y, mut a, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.with_context(|| format!("row {row}: unreadable record"))?;
        let cell = |j: usize| -> Result<f64> {
            let raw = rec.get(j).unwrap_or("").trim();
            if raw.is_empty() {
                bail!("row {row}, column '{}': missing value", header[j]);
            }
            let v: f64 = raw
                .parse()
                .map_err(|_| anyhow!("row {row}, column '{}': not a number: '{raw}'", header[j]))?;
            if !v.is_finite() {
                bail!("row {row}, column '{}': non-finite value '{raw}'", header[j]);
            }
            Ok(v)
        };
        y.push(cell(yi)?);
        a.push(cell(ai)?);
        for &j in &wi {
            w.push(cell(j)?);
        }
    }
    if y.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    let data = Dataset::new(y, a, w, wi.len())?;
    Ok(Table {
        data,
        covariates: cov_names,
    })
}

/// A file, or standard output when no path is given.
pub fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout()),
    })
}

/// Parses `lo:hi:count` or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let grid = if parts.len() == 3 {
        let lo: f64 = parts[0].trim().parse()?;
        let hi: f64 = parts[1].trim().parse()?;
        let k: usize = parts[2].trim().parse()?;
        if k < 2 || !(lo < hi) {
            bail!("grid '{s}': need lo < hi and at least 2 points");
        }
        (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
    } else {
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| anyhow!("grid '{s}': bad value '{t}'"))
            })
            .collect::<Result<Vec<_>>>()?
    };
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        bail!("grid '{s}' is empty or non-finite");
    }
    Ok(grid)
}

pub fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let (l, h) = s
        .split_once(',')
        .ok_or_else(|| anyhow!("expected 'lo,hi', got '{s}'"))?;
    Ok((l.trim().parse()?, h.trim().parse()?))
}

pub fn parse_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Formats a float so that it parses back to the same value.
pub fn fmt(v: f64) -> String {
    format!("{v:?}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}
