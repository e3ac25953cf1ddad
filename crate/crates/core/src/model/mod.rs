//! Core domain types shared by every subsystem: devices, robots, their
//! capabilities and status values, plus the registry that owns them.

mod credential;
mod journal;
mod registry;
mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::Instant;

pub use credential::Credential;
pub use journal::{Attribution, Journal, StatusChange, JOURNAL_CAPACITY};
pub use registry::{IntegrityIssue, ManageOp, Registry};
pub use store::{Database, StoreError};

/// Object id of a device. Zero is reserved for map furniture.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RobotId(pub u32);

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for RobotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    Actuator,
    Sensor,
    ActuatorSensor,
}

impl DeviceKind {
    pub fn senses(self) -> bool {
        matches!(self, DeviceKind::Sensor | DeviceKind::ActuatorSensor)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DeviceKind::Actuator => "actuator",
            DeviceKind::Sensor => "sensor",
            DeviceKind::ActuatorSensor => "actuator_sensor",
        }
    }
}

/// How a device's status is shaped. The first four double as the fallback
/// icon families for devices without a dedicated icon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    OnOff,
    Leveled,
    AppearingDisappearing,
    OpenedClosed,
    Custom,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::OnOff => "on_off",
            Category::Leveled => "leveled",
            Category::AppearingDisappearing => "appearing_disappearing",
            Category::OpenedClosed => "opened_closed",
            Category::Custom => "custom",
        }
    }

    /// Status a freshly registered device of this category starts in.
    pub fn initial_status(self) -> StatusValue {
        match self {
            Category::OnOff => StatusValue::Binary { on: false },
            Category::Leveled => StatusValue::Level { value: 0 },
            Category::AppearingDisappearing => StatusValue::Presence { present: false },
            Category::OpenedClosed => StatusValue::Aperture { open: false },
            Category::Custom => StatusValue::Text { label: String::new() },
        }
    }

    /// Whether `status` has the shape this category allows. `Busy` is a
    /// transitional state any device may report while it works.
    pub fn admits(self, status: &StatusValue) -> bool {
        matches!(
            (self, status),
            (_, StatusValue::Busy { .. })
                | (Category::OnOff, StatusValue::Binary { .. })
                | (Category::Leveled, StatusValue::Level { .. })
                | (Category::AppearingDisappearing, StatusValue::Presence { .. })
                | (Category::OpenedClosed, StatusValue::Aperture { .. })
                | (Category::Custom, StatusValue::Text { .. })
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Vital,
    Security,
    Ambient,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Vital, Tier::Security, Tier::Ambient];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Vital => "vital",
            Tier::Security => "security",
            Tier::Ambient => "ambient",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatusValue {
    Binary {
        on: bool,
    },
    Level {
        value: i64,
    },
    Presence {
        present: bool,
    },
    Aperture {
        open: bool,
    },
    Text {
        label: String,
    },
    /// The job the device or robot is currently busy with.
    Busy {
        job: String,
    },
}

impl StatusValue {
    /// Label used on the wire and in rule conditions.
    pub fn label(&self) -> String {
        match self {
            StatusValue::Binary { on: true } => "On".into(),
            StatusValue::Binary { on: false } => "Off".into(),
            StatusValue::Level { value } => value.to_string(),
            StatusValue::Presence { present: true } => "Present".into(),
            StatusValue::Presence { present: false } => "Absent".into(),
            StatusValue::Aperture { open: true } => "Opened".into(),
            StatusValue::Aperture { open: false } => "Closed".into(),
            StatusValue::Text { label } => label.clone(),
            StatusValue::Busy { job } => format!("Busy({job})"),
        }
    }
}

impl fmt::Display for StatusValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// What kind of parameter an action takes, if any.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamDomain {
    None,
    Location,
    ObjectName,
    Integer { min: i64, max: i64 },
    FreeText,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("parameter not allowed")]
    NotAllowed,
    #[error("parameter required")]
    Required,
    #[error("parameter {0:?} outside domain")]
    OutOfDomain(String),
}

impl ParamDomain {
    pub fn check(&self, param: Option<&str>) -> Result<(), ParamError> {
        match (self, param) {
            (ParamDomain::None, None) => Ok(()),
            (ParamDomain::None, Some(_)) => Err(ParamError::NotAllowed),
            (_, None) => Err(ParamError::Required),
            (ParamDomain::Integer { min, max }, Some(p)) => match p.trim().parse::<i64>() {
                Ok(v) if (*min..=*max).contains(&v) => Ok(()),
                _ => Err(ParamError::OutOfDomain(p.to_string())),
            },
            (_, Some(p)) if p.trim().is_empty() => Err(ParamError::OutOfDomain(p.to_string())),
            (_, Some(_)) => Ok(()),
        }
    }

    /// Compact token used in capability tables on the wire.
    pub fn token(&self) -> String {
        match self {
            ParamDomain::None => "none".into(),
            ParamDomain::Location => "location".into(),
            ParamDomain::ObjectName => "object".into(),
            ParamDomain::Integer { min, max } => format!("int:{min}:{max}"),
            ParamDomain::FreeText => "text".into(),
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Some(match token {
            "none" => ParamDomain::None,
            "location" => ParamDomain::Location,
            "object" => ParamDomain::ObjectName,
            "text" => ParamDomain::FreeText,
            other => {
                let rest = other.strip_prefix("int:")?;
                let (min, max) = rest.split_once(':')?;
                ParamDomain::Integer {
                    min: min.parse().ok()?,
                    max: max.parse().ok()?,
                }
            }
        })
    }
}

/// Inclusive range of a leveled device, used to bucket levels into icon deciles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LevelRange {
    pub min: i64,
    pub max: i64,
}

impl Default for LevelRange {
    fn default() -> Self {
        LevelRange { min: 0, max: 100 }
    }
}

impl LevelRange {
    /// Decile bucket 0..=9 of `value`, clamped to the range.
    pub fn decile(&self, value: i64) -> u8 {
        let span = (self.max - self.min).max(1) as i128;
        let offset = (value.clamp(self.min, self.max) - self.min) as i128;
        ((offset * 10 / span).min(9)) as u8
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceRecord {
    pub oid: DeviceId,
    pub name: String,
    pub kind: DeviceKind,
    pub category: Category,
    /// Accepted verbs and the parameter each one takes.
    #[serde(default)]
    pub verbs: BTreeMap<String, ParamDomain>,
    pub status: StatusValue,
    pub tier: Tier,
    #[serde(default)]
    pub last_updated: Instant,
    /// Base icon key; the current icon id is derived from it and the status.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icon: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_range: Option<LevelRange>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("DUPLICATE_OID {0}")]
    DuplicateOid(DeviceId),
    #[error("INVALID_RECORD {0}")]
    InvalidRecord(String),
    #[error("DUPLICATE_RID {0}")]
    DuplicateRid(RobotId),
    #[error("UNKNOWN_DELEGATION_DEVICE {0}")]
    UnknownDelegationDevice(DeviceId),
    #[error("UNKNOWN_OID {0}")]
    UnknownOid(DeviceId),
    #[error("UNKNOWN_RID {0}")]
    UnknownRid(RobotId),
    #[error("SHAPE_MISMATCH {category} cannot hold {status}")]
    ShapeMismatch { category: &'static str, status: String },
    #[error("UNKNOWN_SCENARIO {0}")]
    UnknownScenario(String),
    #[error("STILL_REFERENCED {name} by {by}")]
    StillReferenced { name: String, by: String },
    #[error("UNKNOWN_RULE {0}")]
    UnknownRule(String),
}

impl DeviceRecord {
    /// A device in its category's initial status.
    pub fn new(oid: u32, name: impl Into<String>, kind: DeviceKind, category: Category, tier: Tier) -> Self {
        DeviceRecord {
            oid: DeviceId(oid),
            name: name.into(),
            kind,
            category,
            verbs: BTreeMap::new(),
            status: category.initial_status(),
            tier,
            last_updated: Instant::default(),
            icon: None,
            level_range: None,
        }
    }

    pub fn with_verb(mut self, verb: impl Into<String>, param: ParamDomain) -> Self {
        self.verbs.insert(verb.into(), param);
        self
    }

    pub fn with_icon(mut self, icon: impl Into<String>) -> Self {
        self.icon = Some(icon.into());
        self
    }

    pub fn with_range(mut self, min: i64, max: i64) -> Self {
        self.level_range = Some(LevelRange { min, max });
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let invalid = |why: &str| Err(ModelError::InvalidRecord(why.to_string()));
        if self.oid.0 == 0 {
            return invalid("oid 0 is reserved for map furniture");
        }
        if self.name.trim().is_empty() {
            return invalid("name must not be empty");
        }
        match self.kind {
            DeviceKind::Sensor if !self.verbs.is_empty() => return invalid("sensor devices accept no verbs"),
            DeviceKind::Actuator | DeviceKind::ActuatorSensor if self.verbs.is_empty() => {
                return invalid("actuator devices need at least one verb")
            }
            _ => {}
        }
        if !self.category.admits(&self.status) {
            return invalid("status shape does not match category");
        }
        if let Some(r) = self.level_range {
            if r.min > r.max {
                return invalid("level range min exceeds max");
            }
        }
        Ok(())
    }

    /// Case-insensitive verb lookup returning the canonical spelling.
    pub fn verb(&self, verb: &str) -> Option<(&str, &ParamDomain)> {
        self.verbs
            .iter()
            .find(|(v, _)| v.eq_ignore_ascii_case(verb))
            .map(|(v, d)| (v.as_str(), d))
    }

    pub fn range(&self) -> LevelRange {
        self.level_range.unwrap_or_default()
    }
}

/// A (device, verb) pair a robot may operate on behalf of the user.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Delegation {
    pub device_oid: DeviceId,
    pub verb: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotRecord {
    pub rid: RobotId,
    pub name: String,
    #[serde(default)]
    pub self_actions: BTreeMap<String, ParamDomain>,
    #[serde(default)]
    pub delegations: BTreeSet<Delegation>,
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Per-verb enable flags; a verb without an entry is enabled.
    #[serde(default)]
    pub action_enabled: BTreeMap<String, bool>,
}

fn yes() -> bool {
    true
}

impl RobotRecord {
    pub fn new(rid: u32, name: impl Into<String>) -> Self {
        RobotRecord {
            rid: RobotId(rid),
            name: name.into(),
            self_actions: BTreeMap::new(),
            delegations: BTreeSet::new(),
            enabled: true,
            action_enabled: BTreeMap::new(),
        }
    }

    pub fn with_action(mut self, verb: impl Into<String>, param: ParamDomain) -> Self {
        self.self_actions.insert(verb.into(), param);
        self
    }

    pub fn with_delegation(mut self, device: u32, verb: impl Into<String>) -> Self {
        self.delegations.insert(Delegation {
            device_oid: DeviceId(device),
            verb: verb.into(),
        });
        self
    }

    pub fn self_action(&self, verb: &str) -> Option<(&str, &ParamDomain)> {
        self.self_actions
            .iter()
            .find(|(v, _)| v.eq_ignore_ascii_case(verb))
            .map(|(v, d)| (v.as_str(), d))
    }

    pub fn delegation(&self, device: DeviceId, verb: &str) -> Option<&Delegation> {
        self.delegations
            .iter()
            .find(|d| d.device_oid == device && d.verb.eq_ignore_ascii_case(verb))
    }

    pub fn action_is_enabled(&self, verb: &str) -> bool {
        self.action_enabled
            .iter()
            .find(|(v, _)| v.eq_ignore_ascii_case(verb))
            .is_none_or(|(_, on)| *on)
    }
}

/// Who performs a resolved command.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Device(DeviceId),
    RobotSelf(RobotId),
    RobotOnDevice(RobotId, DeviceId),
}

impl Actor {
    pub fn robot(self) -> Option<RobotId> {
        match self {
            Actor::Device(_) => None,
            Actor::RobotSelf(r) | Actor::RobotOnDevice(r, _) => Some(r),
        }
    }

    pub fn device(self) -> Option<DeviceId> {
        match self {
            Actor::RobotSelf(_) => None,
            Actor::Device(d) | Actor::RobotOnDevice(_, d) => Some(d),
        }
    }

    /// Compact code: `D<oid>`, `R<rid>` or `R<rid>>D<oid>`.
    pub fn code(self) -> String {
        match self {
            Actor::Device(d) => format!("D{d}"),
            Actor::RobotSelf(r) => format!("R{r}"),
            Actor::RobotOnDevice(r, d) => format!("R{r}>D{d}"),
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        let id = |s: &str, prefix: char| -> Option<u32> {
            let digits = s.strip_prefix(prefix)?;
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            digits.parse().ok()
        };
        if let Some((r, d)) = code.split_once('>') {
            return Some(Actor::RobotOnDevice(RobotId(id(r, 'R')?), DeviceId(id(d, 'D')?)));
        }
        if code.starts_with('R') {
            Some(Actor::RobotSelf(RobotId(id(code, 'R')?)))
        } else {
            Some(Actor::Device(DeviceId(id(code, 'D')?)))
        }
    }
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}
