//! TOML run configuration. Unknown keys are errors: a misspelled key would
//! otherwise silently fall back to a default.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::args::{
    BoundArgs, ComplexityArgs, DomainFlags, SubsetSumArgs, SweepArgs, TrainArgs, TrainFlags, TransferArgs, VerifyArgs,
};
use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub no_timestamp: Option<bool>,
    #[serde(default)]
    pub complexity: ComplexityArgs,
    #[serde(default)]
    pub bound: BoundArgs,
    #[serde(default)]
    pub subset_sum: SubsetSumArgs,
    #[serde(default)]
    pub transfer_check: TransferArgs,
    #[serde(default)]
    pub train: TrainArgs,
    #[serde(default)]
    pub sweep: SweepArgs,
    #[serde(default)]
    pub verify: VerifyArgs,
    #[serde(default)]
    pub training: TrainFlags,
    #[serde(default)]
    pub domains: DomainFlags,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_owned(), source })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config { message, .. } => CliError::Config { path: path.to_owned(), message },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config { path: PathBuf::new(), message: e.message().to_owned() })
    }
}
