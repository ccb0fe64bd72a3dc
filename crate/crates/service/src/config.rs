use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use opnote_backends::ExtractorConfig;
use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 1024 * 1024;

/// Service settings. The `[pipeline]` table is shared with the command line tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
    #[serde(default = "default_storage")]
    pub storage_path: PathBuf,
    #[serde(default = "default_max_upload")]
    pub max_upload_bytes: usize,
    /// Environment variable holding the bearer token; no auth when unset.
    #[serde(default)]
    pub token_env: Option<String>,
    /// Directory that corpus paths given to `/api/eval` are resolved against.
    #[serde(default)]
    pub corpus_root: Option<PathBuf>,
    #[serde(default)]
    pub pipeline: ExtractorConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            listen: default_listen(),
            storage_path: default_storage(),
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
            token_env: None,
            corpus_root: None,
            pipeline: ExtractorConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })
    }
}

fn default_listen() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

fn default_storage() -> PathBuf {
    PathBuf::from("opnote-data")
}

fn default_max_upload() -> usize {
    DEFAULT_MAX_UPLOAD_BYTES
}
