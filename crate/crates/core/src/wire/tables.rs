//! Capability and status records shared by the server pages and clients.
//!
//! ```text
//! DEV|oid|name|kind|category|tier|verb:domain,...|icon|min:max
//! ROB|rid|name|enabled|verb:domain:enabled,...|oid:verb,...
//! STAT|oid|icon_id|status
//! RSTAT|rid|location|status
//! ```

use std::collections::{BTreeMap, BTreeSet};

use super::response::{field, unfield};
use super::sms::NameResolver;
use crate::model::{
    Category, Delegation, DeviceId, DeviceKind, DeviceRecord, LevelRange, ParamDomain, RobotId, RobotRecord, Tier,
};

fn kind_from(s: &str) -> Option<DeviceKind> {
    [DeviceKind::Actuator, DeviceKind::Sensor, DeviceKind::ActuatorSensor]
        .into_iter()
        .find(|k| k.as_str() == s)
}

fn category_from(s: &str) -> Option<Category> {
    [
        Category::OnOff,
        Category::Leveled,
        Category::AppearingDisappearing,
        Category::OpenedClosed,
        Category::Custom,
    ]
    .into_iter()
    .find(|c| c.as_str() == s)
}

fn tier_from(s: &str) -> Option<Tier> {
    Tier::ALL.into_iter().find(|t| t.as_str() == s)
}

fn list(text: &str) -> impl Iterator<Item = &str> {
    text.split(',').filter(|s| !s.is_empty())
}

/// Escape one element of a `,`/`:` separated list inside a field.
fn item(text: &str) -> String {
    text.replace('%', "%25").replace(',', "%2C").replace(':', "%3A")
}

pub fn device_line(d: &DeviceRecord) -> String {
    let verbs: Vec<String> = d
        .verbs
        .iter()
        .map(|(v, p)| format!("{}:{}", item(v), p.token()))
        .collect();
    let range = d
        .level_range
        .map(|r| format!("{}:{}", r.min, r.max))
        .unwrap_or_default();
    format!(
        "DEV|{}|{}|{}|{}|{}|{}|{}|{}",
        d.oid,
        field(&d.name),
        d.kind.as_str(),
        d.category.as_str(),
        d.tier.as_str(),
        field(&verbs.join(",")),
        field(d.icon.as_deref().unwrap_or("")),
        range
    )
}

pub fn robot_line(r: &RobotRecord) -> String {
    let actions: Vec<String> = r
        .self_actions
        .iter()
        .map(|(v, p)| format!("{}:{}:{}", item(v), p.token(), u8::from(r.action_is_enabled(v))))
        .collect();
    let delegations: Vec<String> = r
        .delegations
        .iter()
        .map(|d| format!("{}:{}", d.device_oid, item(&d.verb)))
        .collect();
    format!(
        "ROB|{}|{}|{}|{}|{}",
        r.rid,
        field(&r.name),
        u8::from(r.enabled),
        field(&actions.join(",")),
        field(&delegations.join(","))
    )
}

/// Parse a `DEV|` line; its status is left at the category's initial value.
pub fn parse_device_line(line: &str) -> Option<DeviceRecord> {
    let f: Vec<&str> = line.strip_prefix("DEV|")?.split('|').collect();
    let [oid, name, kind, category, tier, verbs, icon, range] = f[..] else {
        return None;
    };
    let category = category_from(category)?;
    let mut d = DeviceRecord::new(
        oid.parse().ok()?,
        unfield(name),
        kind_from(kind)?,
        category,
        tier_from(tier)?,
    );
    for v in list(&unfield(verbs)) {
        let (verb, domain) = v.split_once(':')?;
        d.verbs.insert(unfield(verb), ParamDomain::from_token(domain)?);
    }
    let icon = unfield(icon);
    d.icon = (!icon.is_empty()).then_some(icon);
    if let Some((min, max)) = range.split_once(':') {
        d.level_range = Some(LevelRange {
            min: min.parse().ok()?,
            max: max.parse().ok()?,
        });
    }
    Some(d)
}

pub fn parse_robot_line(line: &str) -> Option<RobotRecord> {
    let f: Vec<&str> = line.strip_prefix("ROB|")?.split('|').collect();
    let [rid, name, enabled, actions, delegations] = f[..] else {
        return None;
    };
    let mut r = RobotRecord::new(rid.parse().ok()?, unfield(name));
    r.enabled = enabled == "1";
    for a in list(&unfield(actions)) {
        let (head, on) = a.rsplit_once(':')?;

        let (verb, domain) = head.split_once(':')?;
        let verb = unfield(verb);
        r.self_actions.insert(verb.clone(), ParamDomain::from_token(domain)?);
        if on != "1" {
            r.action_enabled.insert(verb, false);
        }
    }
    for d in list(&unfield(delegations)) {
        let (oid, verb) = d.split_once(':')?;
        r.delegations.insert(Delegation {
            device_oid: DeviceId(oid.parse().ok()?),
            verb: unfield(verb),
        });
    }
    Some(r)
}

/// Client-side copy of the capability tables, usable for SMS encoding.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CapabilityTables {
    pub devices: BTreeMap<DeviceId, DeviceRecord>,
    pub robots: BTreeMap<RobotId, RobotRecord>,
}

impl CapabilityTables {
    pub fn from_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> Self {
        let mut t = CapabilityTables::default();
        for line in lines {
            if let Some(d) = parse_device_line(line) {
                t.devices.insert(d.oid, d);
            } else if let Some(r) = parse_robot_line(line) {
                t.robots.insert(r.rid, r);
            }
        }
        t
    }

    pub fn lines(&self) -> Vec<String> {
        self.devices
            .values()
            .map(device_line)
            .chain(self.robots.values().map(robot_line))
            .collect()
    }
}

impl NameResolver for CapabilityTables {
    fn devices_named(&self, name: &str) -> Vec<DeviceId> {
        let name = name.trim();
        self.devices
            .values()
            .filter(|d| d.name.eq_ignore_ascii_case(name))
            .map(|d| d.oid)
            .collect()
    }

    fn robots_named(&self, name: &str) -> Vec<RobotId> {
        let name = name.trim();
        self.robots
            .values()
            .filter(|r| r.name.eq_ignore_ascii_case(name))
            .map(|r| r.rid)
            .collect()
    }

    fn device_name(&self, oid: DeviceId) -> Option<String> {
        self.devices.get(&oid).map(|d| d.name.clone())
    }

    fn robot_name(&self, rid: RobotId) -> Option<String> {
        self.robots.get(&rid).map(|r| r.name.clone())
    }
}

/// One `STAT|` record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StatusRow {
    pub oid: DeviceId,
    pub icon_id: String,
    pub status: String,
}

pub fn status_line(d: &DeviceRecord) -> String {
    format!(
        "STAT|{}|{}|{}",
        d.oid,
        field(&super::icon_id(d)),
        field(&d.status.label())
    )
}

pub fn parse_status_line(line: &str) -> Option<StatusRow> {
    let f: Vec<&str> = line.strip_prefix("STAT|")?.split('|').collect();
    let [oid, icon, status] = f[..] else { return None };
    Some(StatusRow {
        oid: DeviceId(oid.parse().ok()?),
        icon_id: unfield(icon),
        status: unfield(status),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RobotStatusRow {
    pub rid: RobotId,
    pub location: String,
    pub status: String,
}

pub fn robot_status_line(rid: RobotId, location: &str, status: &str) -> String {
    format!("RSTAT|{rid}|{}|{}", field(location), field(status))
}

pub fn parse_robot_status_line(line: &str) -> Option<RobotStatusRow> {
    let f: Vec<&str> = line.strip_prefix("RSTAT|")?.split('|').collect();
    let [rid, location, status] = f[..] else { return None };
    Some(RobotStatusRow {
        rid: RobotId(rid.parse().ok()?),
        location: unfield(location),
        status: unfield(status),
    })
}

/// Scenario names referenced anywhere in a set of scenario lines.
pub fn scenario_names<'a>(lines: impl IntoIterator<Item = &'a str>) -> BTreeSet<String> {
    lines
        .into_iter()
        .filter_map(|l| l.strip_prefix("SCN|"))
        .filter_map(|l| l.split('|').next())
        .map(unfield)
        .collect()
}
