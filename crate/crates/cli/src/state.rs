//! Client state persisted between invocations.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedSession {
    pub magic: String,
    /// Client clock, UTC seconds.
    pub issued_at: i64,
}

/// Raw response lines of one update category and when they were fetched.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cache {
    pub fetched_at: i64,
    pub lines: Vec<String>,
}

impl Cache {
    pub fn age(&self, now: i64) -> i64 {
        now - self.fetched_at
    }
}

/// The two caches age independently: `devices` holds the capability tables
/// (slow-changing), `info` holds the map and live status.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientState {
    pub server: String,
    pub code: String,
    pub user: String,
    #[serde(default)]
    pub session: Option<CachedSession>,
    #[serde(default)]
    pub devices: Option<Cache>,
    #[serde(default)]
    pub info: Option<Cache>,
}

impl ClientState {
    pub fn new(server: impl Into<String>, code: impl Into<String>, user: impl Into<String>) -> Self {
        ClientState {
            server: server.into(),
            code: code.into(),
            user: user.into(),
            ..ClientState::default()
        }
    }

    /// Load a state file; a missing file yields `None`.
    pub fn load(path: &Path) -> io::Result<Option<Self>> {
        match std::fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, text + "\n")?;
        std::fs::rename(tmp, path)
    }

    /// Keep the caches only when they belong to the same server and user.
    pub fn rebind(self, server: &str, code: &str, user: &str) -> Self {
        if self.server == server && self.user == user && self.code == code {
            self
        } else {
            ClientState::new(server, code, user)
        }
    }
}
