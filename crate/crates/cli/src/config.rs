//! Client settings. The file shares its schema with the server
//! configuration where the fields overlap, so one file can drive both.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::client::Staleness;

#[derive(Clone, Debug, Default, Deserialize)]
struct ListenSection {
    gprs: Option<String>,
    sms: Option<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct ClientConfig {
    pub server: Option<String>,
    pub sms_server: Option<String>,
    pub special_code: Option<String>,
    pub secret: Option<String>,
    pub user: Option<String>,
    pub password: Option<String>,
    /// Server-side account table; used for the password when none is given.
    #[serde(default)]
    pub users: BTreeMap<String, String>,
    pub phone: Option<String>,
    #[serde(default)]
    pub allowed_phones: Vec<String>,
    pub state: Option<PathBuf>,
    pub device_max_age: Option<i64>,
    pub info_max_age: Option<i64>,
    #[serde(default)]
    listen: ListenSection,
}

impl ClientConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg: ClientConfig =
            serde_json::from_str(&text).map_err(|e| format!("{}:{}: {e}", path.display(), e.line()))?;
        if let (Some(dir), Some(state)) = (path.parent(), cfg.state.as_mut()) {
            if state.is_relative() {
                *state = dir.join(&*state);
            }
        }
        Ok(cfg)
    }

    pub fn server(&self) -> Option<String> {
        self.server.clone().or_else(|| self.listen.gprs.clone())
    }

    pub fn sms_server(&self) -> Option<String> {
        self.sms_server.clone().or_else(|| self.listen.sms.clone())
    }

    pub fn password_for(&self, user: &str) -> Option<String> {
        self.password.clone().or_else(|| self.users.get(user).cloned())
    }

    pub fn phone(&self) -> Option<String> {
        self.phone.clone().or_else(|| self.allowed_phones.first().cloned())
    }

    pub fn staleness(&self) -> Staleness {
        let d = Staleness::default();
        Staleness {
            device_max_age: self.device_max_age.unwrap_or(d.device_max_age),
            info_max_age: self.info_max_age.unwrap_or(d.info_max_age),
        }
    }
}

/// Default state file: `~/.robohome/state.json`, or the working directory
/// when there is no home directory.
pub fn default_state_path() -> PathBuf {
    match std::env::var_os("HOME") {
        Some(home) => Path::new(&home).join(".robohome").join("state.json"),
        None => PathBuf::from(".robohome-state.json"),
    }
}
