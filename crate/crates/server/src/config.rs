//! Server configuration file: every policy field at top level plus an
//! optional `ladder` path.
//!
//! ```toml
//! ladder = "ladder.toml"
//! dwell_ms = 3000
//! yield_frac = 0.6
//! ```

use std::path::{Path, PathBuf};

use backchannel_core::{Ladder, LadderError, PolicyConfig, PolicyError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Ladder(#[from] LadderError),
}

#[derive(Debug, Clone, Default)]
pub struct ServerConfig {
    pub policy: PolicyConfig,
    pub ladder: Ladder,
}

impl ServerConfig {
    pub fn load(path: &Path) -> Result<ServerConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Relative ladder paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<ServerConfig, ConfigError> {
        let mut table: toml::Table = text.parse()?;
        let ladder = match table.remove("ladder") {
            None => Ladder::default(),
            Some(toml::Value::String(p)) => Ladder::load(&base.join(p))?,
            Some(other) => {
                return Err(PolicyError {
                    field: "ladder",
                    reason: format!("expected a path string, got {other}"),
                }
                .into())
            }
        };
        let policy: PolicyConfig = toml::Value::Table(table).try_into()?;
        policy.validate()?;
        Ok(ServerConfig { policy, ladder })
    }
}
