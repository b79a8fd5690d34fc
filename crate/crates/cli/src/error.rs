use coarsequant::{CoarseError, GeometryError, IndexError, LieError, SymbolError};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("{module} failed: {cause}")]
    Pipeline { module: &'static str, cause: String },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 2 for config and output-path problems, 3 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ConfigInvalid(_) | CliError::Io { .. } => 2,
            CliError::Pipeline { .. } => 3,
        }
    }
}

macro_rules! pipeline_from {
    ($t:ty, $m:literal) => {
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Pipeline { module: $m, cause: e.to_string() }
            }
        }
    };
}

pipeline_from!(CoarseError, "coarse");
pipeline_from!(GeometryError, "geometry");
pipeline_from!(IndexError, "index");
pipeline_from!(LieError, "liegroup");

impl From<SymbolError> for CliError {
    fn from(e: SymbolError) -> Self {
        CliError::ConfigInvalid(e.to_string())
    }
}
