//! Fleet configuration files.
//!
//! ```json
//! {
//!   "devices": [{"oid": 7, "name": "Door", "kind": "actuator_sensor",
//!                "category": "opened_closed", "tier": "security",
//!                "verbs": {"open": "none", "close": "none"}, "room": "Hall",
//!                "icon": "door", "latency": {"close": 3}}],
//!   "robots":  [{"rid": 2, "name": "Cleaning robot", "location": "Dock",
//!                "actions": {"Clean": "object"}, "latency": {"Clean": 120},
//!                "delegations": [{"oid": 5, "verb": "on"}],
//!                "travel_seconds": {"Kitchen": 20}}],
//!   "scripts": [{"oid": 6, "initial": 20, "points": [[0, 25], [30, 31]]}],
//!   "map":     {"walls": [...], "icons": [...]}
//! }
//! ```
//!
//! Verb parameter domains use the wire tokens `none`, `location`, `object`,
//! `text` and `int:<min>:<max>`. Script offsets are seconds after the fleet
//! origin; values are integers for leveled sensors and labels (`On`,
//! `Present`, `Opened`, ...) otherwise.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;

use super::{Fleet, Script, SimDevice, SimRobot};
use crate::map::HomeMap;
use crate::model::{
    Category, DeviceKind, DeviceRecord, LevelRange, ModelError, ParamDomain, Registry, RobotRecord, StatusValue, Tier,
};
use crate::time::Instant;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub path: PathBuf,
    /// 1-based; 0 when the problem has no single line.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "CONFIG_ERROR {}:{}: {}",
            self.path.display(),
            self.line,
            self.message
        )
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub oid: u32,
    pub name: String,
    pub kind: DeviceKind,
    pub category: Category,
    pub tier: Tier,
    #[serde(default)]
    pub verbs: BTreeMap<String, String>,
    #[serde(default)]
    pub room: Option<String>,
    #[serde(default)]
    pub icon: Option<String>,
    #[serde(default)]
    pub range: Option<(i64, i64)>,
    #[serde(default)]
    pub latency: BTreeMap<String, i64>,
    #[serde(default)]
    pub status: Option<Value>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelegationConfig {
    pub oid: u32,
    pub verb: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    pub rid: u32,
    pub name: String,
    #[serde(default)]
    pub location: String,
    #[serde(default)]
    pub actions: BTreeMap<String, String>,
    #[serde(default)]
    pub delegations: Vec<DelegationConfig>,
    #[serde(default)]
    pub latency: BTreeMap<String, i64>,
    #[serde(default)]
    pub travel_seconds: BTreeMap<String, i64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptConfig {
    pub oid: u32,
    pub initial: Value,
    #[serde(default)]
    pub points: Vec<(i64, Value)>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetConfig {
    pub devices: Vec<DeviceConfig>,
    #[serde(default)]
    pub robots: Vec<RobotConfig>,
    #[serde(default)]
    pub scripts: Vec<ScriptConfig>,
    #[serde(default)]
    pub map: HomeMap,
}

/// Read and check a fleet config; script offsets count from `origin`.
pub fn load_fleet(path: &Path, origin: Instant) -> Result<Fleet, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;
    FleetConfig::parse(&text, path)?.build(&text, path, origin)
}

impl FleetConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        if text.trim().is_empty() {
            return Err(ConfigError {
                path: path.to_path_buf(),
                line: 1,
                message: "empty fleet config".into(),
            });
        }
        serde_json::from_str(text).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Check the entries and construct the fleet. `text` is the source the
    /// config came from, used to point errors at a line.
    pub fn build(&self, text: &str, path: &Path, origin: Instant) -> Result<Fleet, ConfigError> {
        let err = |line: usize, message: String| ConfigError {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut fleet = Fleet::new(origin);
        let mut seen = BTreeSet::new();
        for dev in &self.devices {
            let line = || locate(text, "oid", dev.oid, 1);
            if !seen.insert(dev.oid) {
                return Err(err(
                    locate(text, "oid", dev.oid, 2),
                    format!("duplicate oid {}", dev.oid),
                ));
            }
            let record = device_record(dev).map_err(|m| err(line(), m))?;
            let mut sim = SimDevice::new(record);
            if let Some(room) = &dev.room {
                sim = sim.in_room(room);
            }
            for (verb, secs) in &dev.latency {
                if *secs < 0 {
                    return Err(err(line(), format!("negative latency for {verb}")));
                }
                sim = sim.with_latency(verb, *secs);
            }
            fleet.add_device(sim);
        }
        let mut rids = BTreeSet::new();
        for rc in &self.robots {
            let line = || locate(text, "rid", rc.rid, 1);
            if rc.rid == 0 || rc.name.trim().is_empty() {
                return Err(err(line(), "robot needs a positive rid and a name".into()));
            }
            if !rids.insert(rc.rid) {
                return Err(err(locate(text, "rid", rc.rid, 2), format!("duplicate rid {}", rc.rid)));
            }
            let mut rec = RobotRecord::new(rc.rid, &rc.name);
            for (verb, token) in &rc.actions {
                let domain = ParamDomain::from_token(token)
                    .ok_or_else(|| err(line(), format!("unknown parameter domain {token:?}")))?;
                rec = rec.with_action(verb, domain);
            }
            for d in &rc.delegations {
                if !seen.contains(&d.oid) {
                    return Err(err(line(), format!("delegation to unknown oid {}", d.oid)));
                }
                rec = rec.with_delegation(d.oid, &d.verb);
            }
            let mut sim = SimRobot::new(rec, &rc.location);
            for (verb, secs) in &rc.latency {
                sim = sim.with_latency(verb, *secs);
            }
            for (room, secs) in &rc.travel_seconds {
                sim = sim.with_travel(room, *secs);
            }
            fleet.add_robot(sim);
        }
        for sc in &self.scripts {
            let line = locate(text, "oid", sc.oid, seen_count(&self.devices, sc.oid) + 1);
            let Some(dev) = fleet.devices.get_mut(&crate::model::DeviceId(sc.oid)) else {
                return Err(err(line, format!("script for unknown oid {}", sc.oid)));
            };
            if !dev.record.kind.senses() {
                return Err(err(
                    line,
                    format!("{} is not a sensor and cannot be scripted", dev.record.name),
                ));
            }
            let cat = dev.record.category;
            let initial = status_from_json(cat, &sc.initial).map_err(|m| err(line, m))?;
            let mut points = Vec::with_capacity(sc.points.len());
            for (t, v) in &sc.points {
                points.push((*t, status_from_json(cat, v).map_err(|m| err(line, m))?));
            }
            if points.windows(2).any(|w| w[0].0 > w[1].0) {
                return Err(err(line, "script points must be in ascending time order".into()));
            }
            let taken = std::mem::replace(dev, SimDevice::new(dev.record.clone()));
            *dev = taken.with_script(Script { initial, points });
        }
        for icon in &self.map.icons {
            if icon.oid.0 != 0 && !seen.contains(&icon.oid.0) {
                return Err(err(
                    locate_str(text, &icon.name),
                    format!("map icon {} names unknown oid {}", icon.name, icon.oid),
                ));
            }
        }
        fleet.map = self.map.clone();
        Ok(fleet)
    }
}

fn seen_count(devices: &[DeviceConfig], oid: u32) -> usize {
    devices.iter().filter(|d| d.oid == oid).count()
}

fn device_record(dev: &DeviceConfig) -> Result<DeviceRecord, String> {
    let mut rec = DeviceRecord::new(dev.oid, &dev.name, dev.kind, dev.category, dev.tier);
    for (verb, token) in &dev.verbs {
        let domain = ParamDomain::from_token(token).ok_or_else(|| format!("unknown parameter domain {token:?}"))?;
        rec = rec.with_verb(verb, domain);
    }
    if let Some(icon) = &dev.icon {
        rec = rec.with_icon(icon);
    }
    if let Some((min, max)) = dev.range {
        if min >= max {
            return Err(format!("empty level range {min}..{max}"));
        }
        rec.level_range = Some(LevelRange { min, max });
    }
    if let Some(v) = &dev.status {
        rec.status = status_from_json(dev.category, v)?;
    }
    rec.validate().map_err(|e: ModelError| e.to_string())?;
    Ok(rec)
}

/// A JSON value interpreted as a status of `category`.
pub fn status_from_json(category: Category, value: &Value) -> Result<StatusValue, String> {
    let bad = || format!("{value} is not a valid {} status", category.as_str());
    match (category, value) {
        (Category::Leveled, Value::Number(n)) => n.as_i64().map(|value| StatusValue::Level { value }).ok_or_else(bad),
        (Category::Custom, Value::String(s)) => Ok(StatusValue::Text { label: s.clone() }),
        (Category::OnOff, Value::Bool(on)) => Ok(StatusValue::Binary { on: *on }),
        (Category::AppearingDisappearing, Value::Bool(present)) => Ok(StatusValue::Presence { present: *present }),
        (Category::OpenedClosed, Value::Bool(open)) => Ok(StatusValue::Aperture { open: *open }),
        (_, Value::String(s)) => status_from_label(category, s).ok_or_else(bad),
        _ => Err(bad()),
    }
}

/// Parse a wire/condition label such as `On` or `Closed` for `category`.
pub fn status_from_label(category: Category, label: &str) -> Option<StatusValue> {
    let l = label.trim().to_ascii_lowercase();
    Some(match (category, l.as_str()) {
        (Category::OnOff, "on") => StatusValue::Binary { on: true },
        (Category::OnOff, "off") => StatusValue::Binary { on: false },
        (Category::AppearingDisappearing, "present") => StatusValue::Presence { present: true },
        (Category::AppearingDisappearing, "absent") => StatusValue::Presence { present: false },
        (Category::OpenedClosed, "opened" | "open") => StatusValue::Aperture { open: true },
        (Category::OpenedClosed, "closed") => StatusValue::Aperture { open: false },
        (Category::Leveled, _) => StatusValue::Level { value: l.parse().ok()? },
        (Category::Custom, _) => StatusValue::Text {
            label: label.to_string(),
        },
        _ => return None,
    })
}

/// Line of the `nth` occurrence of `"key": value` in `text`, or 0.
fn locate(text: &str, key: &str, value: u32, nth: usize) -> usize {
    let mut found = 0;
    for (i, line) in text.lines().enumerate() {
        let mut rest = line;
        while let Some(pos) = rest.find(&format!("\"{key}\"")) {
            let after = rest[pos + key.len() + 2..].trim_start();
            let tail = after.strip_prefix(':').map(str::trim_start).unwrap_or("");
            let digits: String = tail.chars().take_while(char::is_ascii_digit).collect();
            if digits == value.to_string() {
                found += 1;
                if found == nth {
                    return i + 1;
                }
            }
            rest = &rest[pos + 1..];
        }
    }
    0
}

fn locate_str(text: &str, needle: &str) -> usize {
    let quoted = format!("\"{needle}\"");
    text.lines().position(|l| l.contains(&quoted)).map_or(0, |i| i + 1)
}

impl Fleet {
    /// Register every simulated device and robot; devices first so that
    /// delegations resolve.
    pub fn populate(&self, reg: &mut Registry) -> Result<(), ModelError> {
        let (devices, robots) = self.records();
        for d in devices {
            reg.register_device(d)?;
        }
        for r in robots {
            reg.register_robot(r)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(text: &str) -> Result<Fleet, ConfigError> {
        let p = Path::new("fleet.json");
        FleetConfig::parse(text, p)?.build(text, p, Instant(0))
    }

    #[test]
    fn empty_file_is_rejected() {
        let e = build("  \n").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(e.to_string().starts_with("CONFIG_ERROR fleet.json:1"));
    }

    #[test]
    fn duplicate_oid_points_at_second_entry() {
        let text = r#"{
  "devices": [
    {"oid": 1, "name": "A", "kind": "actuator", "category": "on_off", "tier": "ambient", "verbs": {"on": "none"}},
    {"oid": 1, "name": "B", "kind": "actuator", "category": "on_off", "tier": "ambient", "verbs": {"on": "none"}}
  ]
}"#;
        let e = build(text).unwrap_err();
        assert_eq!(e.line, 4);
        assert!(e.message.contains("duplicate oid 1"));
    }

    #[test]
    fn syntax_error_carries_line() {
        let e = build("{\n\"devices\": [\n,]\n}").unwrap_err();
        assert_eq!(e.line, 3);
    }

    #[test]
    fn scripted_actuator_rejected() {
        let text = r#"{"devices": [{"oid": 1, "name": "L", "kind": "actuator", "category": "on_off", "tier": "ambient", "verbs": {"on": "none"}}],
"scripts": [{"oid": 1, "initial": "Off"}]}"#;
        assert!(build(text).unwrap_err().message.contains("not a sensor"));
    }

    #[test]
    fn labels_by_category() {
        assert_eq!(
            status_from_label(Category::OpenedClosed, "Closed"),
            Some(StatusValue::Aperture { open: false })
        );
        assert_eq!(
            status_from_label(Category::Leveled, "31"),
            Some(StatusValue::Level { value: 31 })
        );
        assert_eq!(status_from_label(Category::OnOff, "Opened"), None);
    }
}
