//! Quantiles of Chernoff's distribution, the law of
//! `argmax_u { Z(u) - u^2 }` for a two-sided standard Brownian motion `Z`
//! with `Z(0) = 0`.

use std::fmt::Write as _;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};

const EMBEDDED: &str = include_str!("../../resources/chernoff_quantiles_v1.txt");

/// Smallest path count accepted for regeneration.
pub const MIN_REGENERATION_PATHS: usize = 100_000;

/// Tabulated quantiles on an increasing probability grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ChernoffTable {
    p: Vec<f64>,
    q: Vec<f64>,
    header: Vec<String>,
}

impl ChernoffTable {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if p.len() != q.len() || p.len() < 3 {
            return Err(Error::InvalidInput("table needs at least 3 matching rows".into()));
        }
        if p.windows(2).any(|w| !(w[0] < w[1])) || q.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput(
                "table must be strictly increasing in p and q".into(),
            ));
        }
        if !(p[0] > 0.0 && p[p.len() - 1] < 1.0) {
            return Err(Error::InvalidInput("probabilities must lie in (0, 1)".into()));
        }
        Ok(Self {
            p,
            q,
            header: Vec::new(),
        })
    }

    /// The table compiled into the library.
    pub fn embedded() -> &'static ChernoffTable {
        static TABLE: OnceLock<ChernoffTable> = OnceLock::new();
        TABLE.get_or_init(|| Self::parse(EMBEDDED).expect("embedded Chernoff table is valid"))
    }

    /// Reads whitespace-separated `p q` rows; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Vec::new();
        let mut q = Vec::new();
        let mut header = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(c) = line.strip_prefix('#') {
                header.push(c.trim().to_string());
                continue;
            }
            if line.is_empty() || line.starts_with('p') {
                continue;
            }
            let mut it = line.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(a)), Some(Ok(b)), None) => {
                    p.push(a);
                    q.push(b);
                }
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "malformed Chernoff table line {}",
                        lineno + 1
                    )))
                }
            }
        }
        let mut t = Self::new(p, q)?;
        t.header = header;
        Ok(t)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for h in &self.header {
            let _ = writeln!(s, "# {h}");
        }
        s.push_str("p q\n");
        for (p, q) in self.p.iter().zip(&self.q) {
            let _ = writeln!(s, "{p:.3} {q:.6}");
        }
        s
    }

    pub fn with_header(mut self, lines: Vec<String>) -> Self {
        self.header = lines;
        self
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn quantiles(&self) -> &[f64] {
        &self.q
    }

    /// `q_p`, linear between table rows. Beyond the table the tail is
    /// extended with `P(W > x) ~ C exp(-2x^3 / 3)`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidInput(format!("probability {p} outside (0, 1)")));
        }
        Ok(self.quantile_unchecked(p))
    }

    fn quantile_unchecked(&self, p: f64) -> f64 {
        let last = self.p.len() - 1;
        if p < self.p[0] {
            return -tail(self.q[last], 1.0 - self.p[last], p);
        }
        if p > self.p[last] {
            return tail(self.q[last], 1.0 - self.p[last], 1.0 - p);
        }
        let k = self.p.partition_point(|&v| v < p);
        if self.p[k] == p {
            return self.q[k];
        }
        let t = (p - self.p[k - 1]) / (self.p[k] - self.p[k - 1]);
        self.q[k - 1] + t * (self.q[k] - self.q[k - 1])
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                return self.quantile_unchecked(u);
            }
        }
    }

    /// `sqrt(int_0^1 q(p)^2 dp)`, the standard deviation implied by the
    /// quantile function (its mean is zero by symmetry).
    pub fn implied_sd(&self) -> f64 {
        let m = 200_000;
        let s: f64 = (0..m)
            .map(|k| {
                let q = self.quantile_unchecked((k as f64 + 0.5) / m as f64);
                q * q
            })
            .sum();
        (s / m as f64).sqrt()
    }
}

/// Upper-tail quantile at exceedance probability `s`, anchored at
/// `x0` with exceedance `s0`.
fn tail(x0: f64, s0: f64, s: f64) -> f64 {
    (x0.powi(3) + 1.5 * (s0 / s).ln()).cbrt()
}

pub fn chernoff_quantile(p: f64) -> Result<f64> {
    ChernoffTable::embedded().quantile(p)
}

/// Simulation settings for rebuilding the table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegenerationConfig {
    pub paths: usize,
    pub half_width: f64,
    pub step: f64,
    pub seed: u64,
}

impl Default for RegenerationConfig {
    fn default() -> Self {
        Self {
            paths: 1_000_000,
            half_width: 3.0,
            step: 1e-3,
            seed: 20_190_101,
        }
    }
}

const CHUNK: usize = 10_000;

/// Location of the maximum of `Z(u) - u^2` over the grid `|u| <= half_width`.
/// Each side is an independent Brownian path started at zero.
fn simulate_argmax<R: Rng + ?Sized>(rng: &mut R, steps: usize, step: f64) -> f64 {
    let sd = step.sqrt();
    let mut best = 0.0;
    let mut best_u = 0.0;
    for sign in [1.0, -1.0] {
        let mut z = 0.0;
        for k in 1..=steps {
            let e: f64 = rng.sample(StandardNormal);
            z += sd * e;
            let u = k as f64 * step;
            let v = z - u * u;
            if v > best {
                best = v;
                best_u = sign * u;
            }
        }
    }
    best_u
}

/// Draws `paths` argmax locations. Paths are simulated in fixed chunks,
/// each on its own ChaCha stream, so the result is independent of the
/// thread count.
pub fn simulate_chernoff(cfg: &RegenerationConfig) -> Result<Vec<f64>> {
    if cfg.paths < MIN_REGENERATION_PATHS {
        return Err(Error::InvalidInput(format!(
            "regeneration needs at least {MIN_REGENERATION_PATHS} paths, got {}",
            cfg.paths
        )));
    }
    if !(cfg.step > 0.0 && cfg.half_width > cfg.step) {
        return Err(Error::InvalidInput("invalid simulation grid".into()));
    }
    let steps = (cfg.half_width / cfg.step).round() as usize;
    let chunks = cfg.paths.div_ceil(CHUNK);
    let draws: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(cfg.paths - c * CHUNK);
            (0..len).map(|_| simulate_argmax(&mut rng, steps, cfg.step)).collect()
        })
        .collect();
    Ok(draws.concat())
}

/// Type-7 sample quantile of sorted data.
pub(crate) fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Rebuilds the table at `p = 0.005, 0.010, ..., 0.995`, symmetrized as
/// `q_p = (qhat_p - qhat_{1-p}) / 2`.
pub fn regenerate_table(cfg: &RegenerationConfig) -> Result<ChernoffTable> {
    let mut draws = simulate_chernoff(cfg)?;
    draws.sort_by(f64::total_cmp);
    let grid: Vec<f64> = (1..200).map(|k| k as f64 * 0.005).collect();
    let q: Vec<f64> = (1..200)
        .map(|k| {
            let lo = sorted_quantile(&draws, k as f64 * 0.005);
            let hi = sorted_quantile(&draws, (200 - k) as f64 * 0.005);
            (lo - hi) / 2.0
        })
        .collect();
    let header = vec![
        "Chernoff distribution quantiles, table version 1".to_string(),
        format!(
            "argmax of two-sided Brownian motion minus u^2 on |u| <= {}, step {}, {} paths, seed {}",
            cfg.half_width, cfg.step, cfg.paths, cfg.seed
        ),
        "symmetrized: q_p = (qhat_p - qhat_(1-p)) / 2".to_string(),
    ];
    Ok(ChernoffTable::new(grid, q)?.with_header(header))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_table_is_symmetric_and_centered() {
        let t = ChernoffTable::embedded();
        assert_eq!(t.quantile(0.5).unwrap(), 0.0);
        let (p, q) = (t.probabilities(), t.quantiles());
        let k = p.len();
        for i in 0..k {
            assert_eq!(q[i], -q[k - 1 - i]);
        }
        let sd = t.implied_sd();
        assert!((0.51..=0.53).contains(&sd), "{sd}");
    }

    #[test]
    fn quantile_is_monotone_into_the_tails() {
        let t = ChernoffTable::embedded();
        let mut prev = f64::NEG_INFINITY;
        for k in 1..10_000 {
            let q = t.quantile(k as f64 / 10_000.0).unwrap();
            assert!(q > prev);
            prev = q;
        }
        assert!(t.quantile(1e-9).unwrap() < t.quantile(0.001).unwrap());
        assert!((t.quantile(1e-7).unwrap() + t.quantile(1.0 - 1e-7).unwrap()).abs() < 1e-6);
        assert!(t.quantile(0.0).is_err());
        assert!(t.quantile(1.0).is_err());
    }

    #[test]
    fn tail_extension_is_continuous() {
        let t = ChernoffTable::embedded();
        let edge = *t.quantiles().last().unwrap();
        assert!((t.quantile(0.995 + 1e-12).unwrap() - edge).abs() < 1e-6);
    }

    #[test]
    fn text_round_trip() {
        let t = ChernoffTable::embedded();
        let again = ChernoffTable::parse(&t.to_text()).unwrap();
        assert_eq!(again.quantiles(), t.quantiles());
    }

    #[test]
    fn rejects_malformed_tables() {
        assert!(ChernoffTable::parse("0.1 -1\n0.5 0\n0.9 x\n").is_err());
        assert!(ChernoffTable::new(vec![0.1, 0.5, 0.4], vec![-1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn regeneration_requires_enough_paths() {
        let cfg = RegenerationConfig {
            paths: 10,
            ..RegenerationConfig::default()
        };
        assert!(regenerate_table(&cfg).is_err());
    }

    #[test]
    fn sample_quantile_type7() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(sorted_quantile(&v, 0.0), 1.0);
        assert_eq!(sorted_quantile(&v, 1.0), 4.0);
        assert!((sorted_quantile(&v, 0.5) - 2.5).abs() < 1e-15);
    }
}
