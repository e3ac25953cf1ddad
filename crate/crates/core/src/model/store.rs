//! `registry.jsonl` persistence: one JSON object per line, the `t` field
//! naming the record type.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    Attribution, Credential, DeviceId, DeviceRecord, Journal, ModelError, Registry, RobotRecord, StatusChange,
    StatusValue,
};
use crate::rules::RuleDef;
use crate::scenario::Scenario;
use crate::time::Instant;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store io: {0}")]
    Io(#[from] io::Error),
    #[error("store line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Serialize, Deserialize)]
struct UserLine {
    username: String,
    #[serde(flatten)]
    credential: Credential,
}

#[derive(Serialize, Deserialize)]
struct PhoneLine {
    number: String,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
enum Line {
    Device(DeviceRecord),
    Robot(RobotRecord),
    Scenario(Scenario),
    Rule(RuleDef),
    User(UserLine),
    Phone(PhoneLine),
}

const KNOWN_TYPES: [&str; 6] = ["device", "robot", "scenario", "rule", "user", "phone"];

impl Registry {
    pub fn to_jsonl(&self) -> String {
        let mut lines: Vec<Line> = Vec::new();
        lines.extend(self.devices.values().cloned().map(Line::Device));
        lines.extend(self.robots.values().cloned().map(Line::Robot));
        lines.extend(self.scenarios.values().cloned().map(Line::Scenario));
        lines.extend(self.rules.values().cloned().map(Line::Rule));
        lines.extend(self.users.iter().map(|(u, c)| {
            Line::User(UserLine {
                username: u.clone(),
                credential: c.clone(),
            })
        }));
        lines.extend(
            self.allowed_phones
                .iter()
                .map(|p| Line::Phone(PhoneLine { number: p.clone() })),
        );
        let mut out = String::new();
        for line in &lines {
            // Serializing plain data structs into a String cannot fail.
            out.push_str(&serde_json::to_string(line).expect("serializable record"));
            out.push('\n');
        }
        out
    }

    /// Parse a store. Unknown record types and unknown fields are skipped.
    pub fn from_jsonl(text: &str) -> Result<Self, StoreError> {
        let mut reg = Registry::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let err = |message: String| StoreError::Parse { line, message };
            let value: serde_json::Value = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
            let t = value.get("t").and_then(|t| t.as_str()).unwrap_or_default();
            if !KNOWN_TYPES.contains(&t) {
                log::warn!("registry line {line}: skipping unknown record type {t:?}");
                continue;
            }
            let record: Line = serde_json::from_value(value).map_err(|e| err(e.to_string()))?;
            match record {
                Line::Device(d) => {
                    d.validate().map_err(|e| err(e.to_string()))?;
                    reg.devices.insert(d.oid, d);
                }
                // Delegations are checked once all devices are loaded.
                Line::Robot(r) => {
                    reg.robots.insert(r.rid, r);
                }
                Line::Scenario(s) => {
                    reg.scenarios.insert(s.name.clone(), s);
                }
                Line::Rule(r) => {
                    reg.rules.insert(r.name.clone(), r);
                }
                Line::User(u) => {
                    reg.users.insert(u.username, u.credential);
                }
                Line::Phone(p) => {
                    reg.allowed_phones.insert(p.number);
                }
            }
        }
        for robot in reg.robots.values() {
            if let Some(d) = robot
                .delegations
                .iter()
                .find(|d| !reg.devices.contains_key(&d.device_oid))
            {
                return Err(ModelError::UnknownDelegationDevice(d.device_oid).into());
            }
        }
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        Self::from_jsonl(&fs::read_to_string(path)?)
    }

    /// Write the store atomically (temp file, then rename).
    pub fn persist(&self, path: &Path) -> Result<(), StoreError> {
        let tmp = path.with_extension("jsonl.tmp");
        fs::write(&tmp, self.to_jsonl())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

/// The registry plus its status journal and backing file. Structural
/// mutations are persisted immediately; status updates mark the store dirty
/// and are written on [`Database::flush`].
#[derive(Debug, Default)]
pub struct Database {
    registry: Registry,
    journal: Journal,
    path: Option<PathBuf>,
    dirty: bool,
}

impl Database {
    pub fn in_memory(registry: Registry) -> Self {
        Database {
            registry,
            ..Default::default()
        }
    }

    /// Open `path`, creating an empty store if it does not exist.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        let registry = if path.exists() {
            Registry::load(&path)?
        } else {
            Registry::new()
        };
        Ok(Database {
            registry,
            journal: Journal::default(),
            path: Some(path),
            dirty: false,
        })
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn journal(&self) -> &Journal {
        &self.journal
    }

    /// Apply a structural change and persist it if it succeeded.
    pub fn mutate<T, E>(&mut self, f: impl FnOnce(&mut Registry) -> Result<T, E>) -> Result<T, E>
    where
        E: From<StoreError>,
    {
        let out = f(&mut self.registry)?;
        self.dirty = true;
        self.flush()?;
        Ok(out)
    }

    /// Update a device status and journal it. Returns whether it changed.
    pub fn set_status(
        &mut self,
        oid: DeviceId,
        status: StatusValue,
        at: Instant,
        by: Attribution,
    ) -> Result<bool, ModelError> {
        let previous = self
            .registry
            .device(oid)
            .map(|d| d.status.clone())
            .ok_or(ModelError::UnknownOid(oid))?;
        self.registry.set_status(oid, status.clone(), at)?;
        self.dirty = true;
        if previous == status {
            return Ok(false);
        }
        self.journal.record(StatusChange { at, oid, status, by });
        Ok(true)
    }

    pub fn flush(&mut self) -> Result<(), StoreError> {
        if let (true, Some(path)) = (self.dirty, &self.path) {
            self.registry.persist(path)?;
        }
        self.dirty = false;
        Ok(())
    }

    /// Mutable access for the owning runtime, bypassing persistence.
    pub(crate) fn registry_mut(&mut self) -> &mut Registry {
        self.dirty = true;
        &mut self.registry
    }
}

impl From<StoreError> for ModelError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Model(m) => m,
            other => ModelError::InvalidRecord(other.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Category, DeviceKind, ParamDomain, Tier};

    #[test]
    fn unknown_types_and_fields_are_ignored() {
        let text = concat!(
            r#"{"t":"device","oid":3,"name":"Lamp","kind":"actuator","category":"on_off","verbs":{"on":"none"},"status":{"kind":"binary","on":true},"tier":"ambient","colour":"red"}"#,
            "\n",
            r#"{"t":"hologram","id":1}"#,
            "\n",
            r#"{"t":"phone","number":"+15550100"}"#,
            "\n",
        );
        let reg = Registry::from_jsonl(text).unwrap();
        assert_eq!(
            reg.device(DeviceId(3)).unwrap().status,
            StatusValue::Binary { on: true }
        );
        assert!(reg.phone_allowed("+15550100"));
    }

    #[test]
    fn bad_line_reports_line_number() {
        let err = Registry::from_jsonl("\n{not json}\n").unwrap_err();
        assert!(matches!(err, StoreError::Parse { line: 2, .. }));
    }

    #[test]
    fn database_persists_and_reopens() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("registry.jsonl");
        let mut db = Database::open(&path).unwrap();
        let lamp = DeviceRecord::new(8, "Lamp", DeviceKind::Actuator, Category::OnOff, Tier::Ambient)
            .with_verb("on", ParamDomain::None);
        db.mutate(|r| r.register_device(lamp)).unwrap();
        let changed = db
            .set_status(
                DeviceId(8),
                StatusValue::Binary { on: true },
                Instant(9),
                Attribution::Device(DeviceId(8)),
            )
            .unwrap();
        assert!(changed);
        assert_eq!(db.journal().len(DeviceId(8)), 1);
        db.flush().unwrap();
        let reopened = Database::open(&path).unwrap();
        assert_eq!(reopened.registry(), db.registry());
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(r#"{"t":"device""#));
        assert!(text.ends_with('\n'));
    }
}
