use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};

/// Prefix of the environment variables that override file settings.
pub const ENV_PREFIX: &str = "IPIKIT_";

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    /// Holds `log.jsonl` and `snapshot.json`.
    pub data_dir: PathBuf,
    /// Documents JSONL served for review.
    pub documents: PathBuf,
    /// Required bearer token; `None` disables auth.
    pub token: Option<String>,
    /// Origin allowed by CORS, e.g. `http://localhost:5173`.
    pub ui_origin: Option<String>,
    pub annotator_a: String,
    pub annotator_b: String,
    /// Snapshot after this many log entries; 0 disables snapshots.
    pub snapshot_every: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("data"),
            documents: PathBuf::from("documents.jsonl"),
            token: None,
            ui_origin: None,
            annotator_a: "annotator_a".into(),
            annotator_b: "annotator_b".into(),
            snapshot_every: 100,
        }
    }
}

impl ServiceConfig {
    /// Reads `path` (if any), resolving relative paths against its directory,
    /// then applies `IPIKIT_*` overrides from the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut config = match path {
            Some(path) => Self::from_file(path)?,
            None => ServiceConfig::default(),
        };
        config.apply_env(|key| std::env::var(key).ok())?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: ServiceConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            config.data_dir = base.join(&config.data_dir);
            config.documents = base.join(&config.documents);
        }
        Ok(config)
    }

    /// Overrides from `lookup("IPIKIT_LISTEN")` and friends.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        let get = |name: &str| lookup(&format!("{ENV_PREFIX}{name}"));
        if let Some(v) = get("LISTEN") {
            self.listen = v;
        }
        if let Some(v) = get("DATA_DIR") {
            self.data_dir = v.into();
        }
        if let Some(v) = get("DOCUMENTS") {
            self.documents = v.into();
        }
        if let Some(v) = get("TOKEN") {
            self.token = (!v.is_empty()).then_some(v);
        }
        if let Some(v) = get("UI_ORIGIN") {
            self.ui_origin = (!v.is_empty()).then_some(v);
        }
        if let Some(v) = get("ANNOTATOR_A") {
            self.annotator_a = v;
        }
        if let Some(v) = get("ANNOTATOR_B") {
            self.annotator_b = v;
        }
        if let Some(v) = get("SNAPSHOT_EVERY") {
            self.snapshot_every = v
                .parse()
                .map_err(|_| Error::Config(format!("{ENV_PREFIX}SNAPSHOT_EVERY: not a number: {v}")))?;
        }
        if self.annotator_a == self.annotator_b {
            return Err(Error::Config("annotator_a and annotator_b must differ".into()));
        }
        Ok(())
    }
}
