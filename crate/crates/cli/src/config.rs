//! Experiment configs: JSON, one pipeline verb, a refinement ladder and a seed.

use crate::error::CliError;
use coarsequant::geometry::{ManifoldGrid, ManifoldStanza};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    Quantize,
    Index,
    Recover,
    Jacobi,
    Average,
    Diagnose,
    Compare,
}

impl Verb {
    pub fn name(self) -> &'static str {
        match self {
            Verb::Quantize => "quantize",
            Verb::Index => "index",
            Verb::Recover => "recover",
            Verb::Jacobi => "jacobi",
            Verb::Average => "average",
            Verb::Diagnose => "diagnose",
            Verb::Compare => "compare",
        }
    }
}

/// One ladder level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rung {
    pub grid_n: usize,
    pub radius: f64,
    /// Largest admissible fiber modulus across a partition ball.
    #[serde(default)]
    pub epsilon: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub svg: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub manifold: ManifoldStanza,
    pub symbol: String,
    pub verb: Verb,
    pub ladder: Vec<Rung>,
    #[serde(default)]
    pub outputs: Outputs,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::ConfigInvalid(m));
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return bad(format!("name {:?} must be nonempty and use only [A-Za-z0-9._-]", self.name));
        }
        if self.ladder.is_empty() {
            return bad("ladder must have at least one level".into());
        }
        for r in &self.ladder {
            if r.grid_n < 4 {
                return bad(format!("grid_n {} is below 4", r.grid_n));
            }
            if !(r.radius.is_finite() && r.radius > 0.0) {
                return bad(format!("radius {} must be positive", r.radius));
            }
            if r.epsilon.is_some_and(|e| !(e.is_finite() && e > 0.0)) {
                return bad(format!("epsilon {:?} must be positive", r.epsilon));
            }
        }
        for w in self.ladder.windows(2) {
            if w[1].grid_n <= w[0].grid_n || w[1].radius > w[0].radius {
                return bad(format!(
                    "ladder is not strictly refining: ({}, {}) then ({}, {})",
                    w[0].grid_n, w[0].radius, w[1].grid_n, w[1].radius
                ));
            }
        }
        self.grid(&self.ladder[0])?;
        Ok(())
    }

    /// The manifold at the grid size of `rung`.
    pub fn grid(&self, rung: &Rung) -> Result<ManifoldGrid, CliError> {
        let mut s = self.manifold.clone();
        s.n = rung.grid_n;
        ManifoldGrid::from_stanza(&s).map_err(|e| CliError::ConfigInvalid(e.to_string()))
    }
}
