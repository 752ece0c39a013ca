use std::path::{Path, PathBuf};

use clap::ValueEnum;
use periodic_jacobi::background::PeriodicBackground;
use periodic_jacobi::jost::{Perturbation, PerturbedOperator};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Bands,
    States,
    Scattering,
    Smallt,
    Asymptotics,
    Verify,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Bands => "bands",
            Task::States => "states",
            Task::Scattering => "scattering",
            Task::Smallt => "smallt",
            Task::Asymptotics => "asymptotics",
            Task::Verify => "verify",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("field `{field}`: {message}")]
    Field { field: &'static str, message: String },
}

fn field(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        message: message.into(),
    }
}

/// One job, as read from a flat TOML document.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub task: Option<Task>,
    pub q: usize,
    pub a0: Vec<f64>,
    pub b0: Vec<f64>,
    pub p: Option<usize>,
    pub u: Option<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    /// Spectral points for `scattering`.
    pub lambda: Option<Vec<f64>>,
    /// Interior points per band when `lambda` is absent.
    pub band_points: Option<usize>,
    /// Coupling grid for `smallt`.
    pub t: Option<Vec<f64>>,
    /// Gap index for `smallt`.
    pub gap: Option<usize>,
    /// Half-width of the truncated matrix used by `verify`.
    pub truncation: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
}

pub const DEFAULT_T: [f64; 3] = [1e-3, 5e-4, 2.5e-4];

impl JobConfig {
    pub fn load(path: &Path) -> Result<JobConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        JobConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<JobConfig, ConfigError> {
        let cfg: JobConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.q == 0 {
            return Err(field("q", "period must be at least 1"));
        }
        if self.a0.len() != self.q {
            return Err(field("a0", format!("expected {} entries, got {}", self.q, self.a0.len())));
        }
        if self.b0.len() != self.q {
            return Err(field("b0", format!("expected {} entries, got {}", self.q, self.b0.len())));
        }
        if let Some(i) = self.a0.iter().position(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(field("a0", format!("entry {i} must be positive and finite")));
        }
        if self.b0.iter().any(|b| !b.is_finite()) {
            return Err(field("b0", "entries must be finite"));
        }
        let p = self.support()?;
        for (name, list) in [("u", &self.u), ("v", &self.v)] {
            if let Some(list) = list {
                if list.len() != p + 1 {
                    return Err(field(name, format!("expected p+1 = {} entries, got {}", p + 1, list.len())));
                }
                if list.iter().any(|x| !x.is_finite()) {
                    return Err(field(name, "entries must be finite"));
                }
            }
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(field("tol", "must be positive"));
            }
        }
        if let Some(t) = &self.t {
            if t.len() < 3 || t.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(field("t", "need at least three positive values"));
            }
        }
        if let Some(l) = &self.lambda {
            if l.iter().any(|x| !x.is_finite()) {
                return Err(field("lambda", "entries must be finite"));
            }
        }
        if self.band_points == Some(0) {
            return Err(field("band_points", "must be at least 1"));
        }
        if self.truncation == Some(0) {
            return Err(field("truncation", "must be at least 1"));
        }
        Ok(())
    }

    /// Support length `p`, from the explicit field or the lists.
    pub fn support(&self) -> Result<usize, ConfigError> {
        let from_lists = self.u.as_ref().or(self.v.as_ref()).map(|l| l.len());
        match (self.p, from_lists) {
            (Some(p), _) => Ok(p),
            (None, Some(0)) => Err(field("v", "list must not be empty")),
            (None, Some(n)) => Ok(n - 1),
            (None, None) => Ok(0),
        }
    }

    pub fn operator(&self) -> Result<PerturbedOperator, periodic_jacobi::Error> {
        let bg = PeriodicBackground::new(self.a0.clone(), self.b0.clone())?;
        let p = self.support().unwrap_or(0);
        let u = self.u.clone().unwrap_or_else(|| vec![0.0; p + 1]);
        let v = self.v.clone().unwrap_or_else(|| vec![0.0; p + 1]);
        PerturbedOperator::new(bg, Perturbation::new(u, v)?)
    }
}
