//! Run configuration: a JSON document holding the instance spec, solver
//! settings and file locations. Every section is optional; unknown keys are
//! rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tucker_completion::bench::InstanceSpec;
use tucker_completion::SolverConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Instance to generate (`gen`); its ranks also serve `complete`.
    pub instance: Option<InstanceSpec>,
    /// Target multilinear rank for `complete`, overriding `instance.ranks`.
    pub ranks: Option<[usize; 3]>,
    /// Seed for the random start in `complete` and the instance in `gen`.
    pub seed: Option<u64>,
    pub solver: SolverConfig,
    pub out_dir: Option<PathBuf>,
    pub inputs: Inputs,
    pub outputs: Outputs,
    pub bench: BenchConfig,
}

/// Input files for `complete`. Relative defaults live in the output directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub validation: Option<PathBuf>,
    /// Starting point (factor file); a random start is used otherwise.
    pub init: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub trace: Option<PathBuf>,
    /// Where to save the final factors; nothing is saved when unset.
    pub factors: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub cases: Vec<String>,
    pub seeds: Option<Vec<u64>>,
    pub full_scale: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })
    }

    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
