//! One JSON document per session in a directory. Writes go to a temporary
//! file in the same directory and are renamed over the old document.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use autoopt::pipeline::Session;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("session '{0}' not found")]
    NotFound(String),
    #[error("invalid session id '{0}'")]
    BadId(String),
    #[error("session store I/O: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt session document {path}: {message}")]
    Corrupt { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    #[default]
    Idle,
    /// A pipeline step is in progress; poll until it returns to idle.
    Running,
}

/// A response already sent for a client token, replayed on retry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replay {
    pub status: u16,
    pub body: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredSession {
    pub session: Session,
    #[serde(default)]
    pub status: Status,
    /// Message of the last failed step, cleared by the next success.
    #[serde(default)]
    pub last_error: Option<String>,
    #[serde(default)]
    pub tokens: BTreeMap<String, Replay>,
}

impl StoredSession {
    pub fn new(session: Session) -> Self {
        Self {
            session,
            status: Status::Idle,
            last_error: None,
            tokens: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
}

impl SessionStore {
    /// Opens (creating if needed) a store directory. Sessions left
    /// `Running` by a crash are reset to idle: their step never committed.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let store = Self { dir: dir.into() };
        fs::create_dir_all(&store.dir)?;
        for id in store.ids()? {
            let mut s = store.load(&id)?;
            if s.status == Status::Running {
                s.status = Status::Idle;
                s.last_error = Some("interrupted before the step completed".into());
                store.save(&s)?;
            }
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::BadId(id.to_owned()));
        }
        Ok(self.dir.join(format!("{id}.json")))
    }

    pub fn ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    if valid_id(stem) {
                        ids.push(stem.to_owned());
                    }
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn load(&self, id: &str) -> Result<StoredSession, StoreError> {
        let path = self.path(id)?;
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(id.to_owned()))
            }
            Err(e) => return Err(e.into()),
        };
        serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, stored: &StoredSession) -> Result<(), StoreError> {
        let path = self.path(&stored.session.id)?;
        let body = serde_json::to_vec_pretty(stored).map_err(io::Error::other)?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(&body)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_restricted() {
        assert!(valid_id("3f2a-bc"));
        assert!(!valid_id("../etc/passwd"));
        assert!(!valid_id(""));
        assert!(!valid_id("a.json"));
    }
}
