//! Command-line driver for the levqsim pipelines.
//!
//! Each command reads one TOML block, runs the matching core pipeline and
//! writes CSV or JSON artifacts that carry the resolved configuration in a
//! provenance header.

pub mod config;
pub mod error;
pub mod figures;
pub mod output;
pub mod run;

use std::path::{Path, PathBuf};

pub use config::{CommandKind, Format, Profile, RunConfig};
pub use error::{CliError, ErrorKind};

/// Flag values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub profile: Option<Profile>,
}

/// Reads a config file, or starts from an empty config when `path` is absent.
pub fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            RunConfig::from_toml(&text)
        }
        None => Ok(RunConfig::default()),
    }
}

/// Applies flags over the file values and checks the command block.
pub fn resolve(config: RunConfig, command: CommandKind, flags: &Overrides) -> Result<RunConfig, CliError> {
    let mut c = config.resolve(command)?;
    if let Some(d) = &flags.out {
        c.output.dir = Some(d.clone());
    }
    if let Some(f) = flags.format {
        c.output.format = f;
    }
    if let (Some(p), Some(fig)) = (flags.profile, c.figures.as_mut()) {
        fig.profile = p;
    }
    Ok(c)
}

/// Output directory of a resolved config.
pub fn out_dir(config: &RunConfig) -> PathBuf {
    config.output.dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

/// Runs a resolved config.
pub fn execute(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    run::run(config, &out_dir(config))
}
