//! Server configuration file (JSON).
//!
//! Relative paths are resolved against the directory holding the file. The
//! hash used throughout the protocol is SHA-256.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::runtime::{ClockMode, PollPlan};
use crate::wire::auth::DEFAULT_TTL;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Listen {
    /// Query-string line socket.
    #[serde(default = "default_gprs")]
    pub gprs: String,
    #[serde(default = "default_sms")]
    pub sms: String,
    /// HTTP gateway serving the same pages to browsers.
    #[serde(default = "default_http")]
    pub http: String,
}

fn default_gprs() -> String {
    "127.0.0.1:7700".into()
}
fn default_sms() -> String {
    "127.0.0.1:7701".into()
}
fn default_http() -> String {
    "127.0.0.1:7780".into()
}

impl Default for Listen {
    fn default() -> Self {
        Listen {
            gprs: default_gprs(),
            sms: default_sms(),
            http: default_http(),
        }
    }
}

/// Fields unknown to the server are ignored so one file can also configure
/// the command-line client.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerConfig {
    /// Pre-shared secret K.
    pub secret: String,
    pub special_code: String,
    #[serde(default = "default_ttl")]
    pub ttl: i64,
    #[serde(default)]
    pub poll: PollPlan,
    #[serde(default)]
    pub listen: Listen,
    #[serde(default)]
    pub allowed_phones: Vec<String>,
    /// Accounts created at startup when missing from the store.
    #[serde(default)]
    pub users: BTreeMap<String, String>,
    #[serde(default)]
    pub store: Option<PathBuf>,
    #[serde(default)]
    pub fleet: Option<PathBuf>,
    #[serde(default = "default_clock")]
    pub clock: ClockMode,
    /// Virtual clock start, ISO-8601.
    #[serde(default)]
    pub start: Option<String>,
    /// Seeds the session RNG; omit for OS entropy.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub trace: Option<PathBuf>,
    /// Scenario and rule text files loaded at startup.
    #[serde(default)]
    pub scenarios: Vec<PathBuf>,
    #[serde(default)]
    pub rules: Vec<PathBuf>,
}

fn default_ttl() -> i64 {
    DEFAULT_TTL
}
fn default_clock() -> ClockMode {
    ClockMode::Virtual
}

impl ServerConfig {
    pub fn new(secret: impl Into<String>, special_code: impl Into<String>) -> Self {
        ServerConfig {
            secret: secret.into(),
            special_code: special_code.into(),
            ttl: DEFAULT_TTL,
            poll: PollPlan::default(),
            listen: Listen::default(),
            allowed_phones: Vec::new(),
            users: BTreeMap::new(),
            store: None,
            fleet: None,
            clock: ClockMode::Virtual,
            start: None,
            seed: None,
            trace: None,
            scenarios: Vec::new(),
            rules: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg: ServerConfig =
            serde_json::from_str(&text).map_err(|e| format!("{}:{}: {e}", path.display(), e.line()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.check()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.store.iter_mut().for_each(fix);
        self.fleet.iter_mut().for_each(fix);
        self.trace.iter_mut().for_each(fix);
        self.scenarios.iter_mut().for_each(fix);
        self.rules.iter_mut().for_each(fix);
    }

    pub fn check(&self) -> Result<(), String> {
        if self.secret.is_empty() || self.special_code.is_empty() {
            return Err("secret and special_code must be set".into());
        }
        if self.ttl < 1 {
            return Err("ttl must be positive".into());
        }
        self.poll.check()
    }
}
