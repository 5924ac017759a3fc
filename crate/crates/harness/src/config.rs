//! Flat key-value experiment configuration.
//!
//! Grammar: one `key = value` pair per line; `#` starts a comment; blank
//! lines ignored. Lists are comma-separated. `iota` accepts the literal
//! `critical` for the value that puts the weight law at the critical point.
//! Unrecognized keys starting with `tol_` are kept as tolerance overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use critgraph::weights::critical_iota;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: String,
    /// Graph sizes for sweeps; single-size experiments use the first entry.
    pub n_list: Vec<usize>,
    pub tau: f64,
    /// `None` means "critical": iota = (tau-3)/(tau-2).
    pub iota: Option<f64>,
    pub lambda: f64,
    /// Entrance-boundary prefactor; `None` derives the rank-one value.
    pub alpha: Option<f64>,
    /// Truncation depth for entrance boundaries / thinned series.
    pub boundary_len: usize,
    /// Vertex count for p-tree / surrogate constructions.
    pub m: usize,
    pub gamma: f64,
    pub horizon: f64,
    pub replicas: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: String::new(),
            n_list: vec![10_000],
            tau: 3.5,
            iota: None,
            lambda: 0.0,
            alpha: None,
            boundary_len: 10_000,
            m: 4,
            gamma: 1.0,
            horizon: 40.0,
            replicas: 200,
            seed: 42,
            out_dir: None,
            tolerances: BTreeMap::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn named(name: &str) -> Self {
        Self {
            experiment: name.to_string(),
            ..Self::default()
        }
    }

    pub fn iota_value(&self) -> f64 {
        self.iota.unwrap_or_else(|| critical_iota(self.tau))
    }

    /// Rank-one entrance-boundary prefactor `(tau-2)/(tau-1)` unless
    /// overridden.
    pub fn alpha_value(&self) -> f64 {
        self.alpha
            .unwrap_or((self.tau - 2.0) / (self.tau - 1.0))
    }

    pub fn tol(&self, key: &str, default: f64) -> f64 {
        self.tolerances.get(key).copied().unwrap_or(default)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected `key = value`", lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            let ctx = || format!("line {}: bad value for {key}", lineno + 1);
            match key {
                "experiment" => cfg.experiment = value.to_string(),
                "n_list" | "n" => {
                    cfg.n_list = value
                        .split(',')
                        .map(|v| v.trim().parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .with_context(ctx)?;
                    if cfg.n_list.is_empty() {
                        bail!("line {}: empty n_list", lineno + 1);
                    }
                }
                "tau" => cfg.tau = value.parse().with_context(ctx)?,
                "iota" => {
                    cfg.iota = if value == "critical" {
                        None
                    } else {
                        Some(value.parse().with_context(ctx)?)
                    }
                }
                "lambda" => cfg.lambda = value.parse().with_context(ctx)?,
                "alpha" => {
                    cfg.alpha = if value == "auto" {
                        None
                    } else {
                        Some(value.parse().with_context(ctx)?)
                    }
                }
                "j" | "boundary_len" => cfg.boundary_len = value.parse().with_context(ctx)?,
                "m" => cfg.m = value.parse().with_context(ctx)?,
                "gamma" => cfg.gamma = value.parse().with_context(ctx)?,
                "horizon" => cfg.horizon = value.parse().with_context(ctx)?,
                "replicas" => cfg.replicas = value.parse().with_context(ctx)?,
                "seed" => cfg.seed = value.parse().with_context(ctx)?,
                "out_dir" => cfg.out_dir = Some(PathBuf::from(value)),
                _ if key.starts_with("tol_") => {
                    cfg.tolerances
                        .insert(key.to_string(), value.parse().with_context(ctx)?);
                }
                _ => bail!("line {}: unknown key `{key}`", lineno + 1),
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("experiment", self.experiment.clone());
        push(
            "n_list",
            self.n_list
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        push("tau", self.tau.to_string());
        push(
            "iota",
            self.iota
                .map(|v| v.to_string())
                .unwrap_or_else(|| "critical".to_string()),
        );
        push("lambda", self.lambda.to_string());
        push(
            "alpha",
            self.alpha
                .map(|v| v.to_string())
                .unwrap_or_else(|| "auto".to_string()),
        );
        push("boundary_len", self.boundary_len.to_string());
        push("m", self.m.to_string());
        push("gamma", self.gamma.to_string());
        push("horizon", self.horizon.to_string());
        push("replicas", self.replicas.to_string());
        push("seed", self.seed.to_string());
        if let Some(dir) = &self.out_dir {
            push("out_dir", dir.display().to_string());
        }
        for (k, v) in &self.tolerances {
            push(k, v.to_string());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut cfg = ExperimentConfig::named("degree-law");
        cfg.n_list = vec![1024, 2048];
        cfg.tau = 3.4;
        cfg.iota = Some(0.5);
        cfg.tolerances.insert("tol_slope".into(), 0.07);
        let text = cfg.to_text();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(back.experiment, "degree-law");
        assert_eq!(back.n_list, vec![1024, 2048]);
        assert_eq!(back.iota, Some(0.5));
        assert_eq!(back.tol("tol_slope", 0.0), 0.07);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn critical_iota_default() {
        let cfg = ExperimentConfig::parse("tau = 3.5\niota = critical\n").unwrap();
        assert!((cfg.iota_value() - 1.0 / 3.0).abs() < 1e-12);
        assert!((cfg.alpha_value() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        assert!(ExperimentConfig::parse("bogus = 1\n").is_err());
        assert!(ExperimentConfig::parse("tau\n").is_err());
        assert!(ExperimentConfig::parse("tau = abc\n").is_err());
    }
}
