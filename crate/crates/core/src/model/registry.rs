use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{Credential, DeviceId, DeviceRecord, ModelError, RobotId, RobotRecord, StatusValue, Tier};
use crate::rules::RuleDef;
use crate::scenario::{ActorRef, Scenario, Task};
use crate::time::Instant;

/// The home's database: every registered device, robot, scenario, rule,
/// user credential and allowed SMS sender.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Registry {
    pub(crate) devices: BTreeMap<DeviceId, DeviceRecord>,
    pub(crate) robots: BTreeMap<RobotId, RobotRecord>,
    pub(crate) scenarios: BTreeMap<String, Scenario>,
    pub(crate) rules: BTreeMap<String, RuleDef>,
    pub(crate) users: BTreeMap<String, Credential>,
    pub(crate) allowed_phones: BTreeSet<String>,
}

/// A dangling reference found by [`Registry::integrity_check`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegrityIssue {
    pub owner: String,
    pub missing: String,
}

impl fmt::Display for IntegrityIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} references missing {}", self.owner, self.missing)
    }
}

/// Scenario management verbs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ManageOp {
    Enable,
    Disable,
    Delete,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_device(&mut self, rec: DeviceRecord) -> Result<(), ModelError> {
        rec.validate()?;
        if self.devices.contains_key(&rec.oid) {
            return Err(ModelError::DuplicateOid(rec.oid));
        }
        self.devices.insert(rec.oid, rec);
        Ok(())
    }

    /// Remove a device. Scenarios and rules that mention it are left in place
    /// and will fail validation until fixed.
    pub fn remove_device(&mut self, oid: DeviceId) -> Result<DeviceRecord, ModelError> {
        self.devices.remove(&oid).ok_or(ModelError::UnknownOid(oid))
    }

    pub fn register_robot(&mut self, rec: RobotRecord) -> Result<(), ModelError> {
        if rec.name.trim().is_empty() || rec.rid.0 == 0 {
            return Err(ModelError::InvalidRecord("robot needs a name and a rid >= 1".into()));
        }
        if self.robots.contains_key(&rec.rid) {
            return Err(ModelError::DuplicateRid(rec.rid));
        }
        if let Some(d) = rec
            .delegations
            .iter()
            .find(|d| !self.devices.contains_key(&d.device_oid))
        {
            return Err(ModelError::UnknownDelegationDevice(d.device_oid));
        }
        self.robots.insert(rec.rid, rec);
        Ok(())
    }

    /// Enable or disable a robot, or a single verb of it when `verb` is given.
    pub fn set_robot_enabled(&mut self, rid: RobotId, verb: Option<&str>, enabled: bool) -> Result<(), ModelError> {
        let robot = self.robots.get_mut(&rid).ok_or(ModelError::UnknownRid(rid))?;
        match verb {
            None => robot.enabled = enabled,
            Some(v) => {
                let key = robot
                    .self_action(v)
                    .map(|(k, _)| k.to_string())
                    .or_else(|| {
                        robot
                            .delegations
                            .iter()
                            .find(|d| d.verb.eq_ignore_ascii_case(v))
                            .map(|d| d.verb.clone())
                    })
                    .ok_or_else(|| ModelError::InvalidRecord(format!("robot {rid} has no action {v}")))?;
                robot.action_enabled.insert(key, enabled);
            }
        }
        Ok(())
    }

    pub fn set_status(&mut self, oid: DeviceId, status: StatusValue, at: Instant) -> Result<(), ModelError> {
        let dev = self.devices.get_mut(&oid).ok_or(ModelError::UnknownOid(oid))?;
        if !dev.category.admits(&status) {
            return Err(ModelError::ShapeMismatch {
                category: dev.category.as_str(),
                status: status.label(),
            });
        }
        dev.status = status;
        dev.last_updated = at;
        Ok(())
    }

    /// Value copies of the devices in `tier` (or all), ascending by oid.
    pub fn snapshot(&self, tier: Option<Tier>) -> Vec<DeviceRecord> {
        self.devices
            .values()
            .filter(|d| tier.is_none_or(|t| d.tier == t))
            .cloned()
            .collect()
    }

    pub fn device(&self, oid: DeviceId) -> Option<&DeviceRecord> {
        self.devices.get(&oid)
    }

    pub fn devices(&self) -> impl Iterator<Item = &DeviceRecord> {
        self.devices.values()
    }

    pub fn robot(&self, rid: RobotId) -> Option<&RobotRecord> {
        self.robots.get(&rid)
    }

    pub fn robots(&self) -> impl Iterator<Item = &RobotRecord> {
        self.robots.values()
    }

    /// Devices whose name matches case-insensitively.
    pub fn devices_named(&self, name: &str) -> Vec<&DeviceRecord> {
        let name = name.trim();
        self.devices
            .values()
            .filter(|d| d.name.eq_ignore_ascii_case(name))
            .collect()
    }

    pub fn robots_named(&self, name: &str) -> Vec<&RobotRecord> {
        let name = name.trim();
        self.robots
            .values()
            .filter(|r| r.name.eq_ignore_ascii_case(name))
            .collect()
    }

    /// Lint: device or robot names used more than once. Names are not keys,
    /// so duplicates are legal but make text references ambiguous.
    pub fn duplicate_names(&self) -> Vec<String> {
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for n in self
            .devices
            .values()
            .map(|d| &d.name)
            .chain(self.robots.values().map(|r| &r.name))
        {
            *seen.entry(n.to_lowercase()).or_default() += 1;
        }
        seen.into_iter().filter(|(_, c)| *c > 1).map(|(n, _)| n).collect()
    }

    // Scenarios ------------------------------------------------------------

    /// Exact key match first, else a unique case-insensitive match.
    pub fn scenario(&self, name: &str) -> Option<&Scenario> {
        let name = name.trim();
        if let Some(s) = self.scenarios.get(name) {
            return Some(s);
        }
        let mut it = self.scenarios.values().filter(|s| s.name.eq_ignore_ascii_case(name));
        match (it.next(), it.next()) {
            (Some(s), None) => Some(s),
            _ => None,
        }
    }

    pub fn scenarios(&self) -> impl Iterator<Item = &Scenario> {
        self.scenarios.values()
    }

    /// Insert or replace a scenario, keyed by its name.
    pub fn put_scenario(&mut self, scenario: Scenario) {
        self.scenarios.insert(scenario.name.clone(), scenario);
    }

    pub fn manage_scenario(&mut self, name: &str, op: ManageOp) -> Result<(), ModelError> {
        let key = self
            .scenario(name)
            .map(|s| s.name.clone())
            .ok_or_else(|| ModelError::UnknownScenario(name.to_string()))?;
        match op {
            ManageOp::Enable | ManageOp::Disable => {
                if let Some(s) = self.scenarios.get_mut(&key) {
                    s.enabled = op == ManageOp::Enable;
                }
            }
            ManageOp::Delete => {
                if let Some(by) = self.referrers(&key).into_iter().next() {
                    return Err(ModelError::StillReferenced { name: key, by });
                }
                self.scenarios.remove(&key);
            }
        }
        Ok(())
    }

    /// Scenarios and rules that nest the scenario `name`.
    pub fn referrers(&self, name: &str) -> Vec<String> {
        let refers = |tasks: &[Task]| {
            tasks
                .iter()
                .any(|t| matches!(t, Task::ScenarioRef { name: n, .. } if n.eq_ignore_ascii_case(name)))
        };
        let mut out: Vec<String> = self
            .scenarios
            .values()
            .filter(|s| s.name != name && refers(&s.tasks))
            .map(|s| s.name.clone())
            .collect();
        out.extend(
            self.rules
                .values()
                .filter(|r| refers(&r.actions))
                .map(|r| format!("rule {}", r.name)),
        );
        out
    }

    // Rules ----------------------------------------------------------------

    pub fn rule(&self, name: &str) -> Option<&RuleDef> {
        self.rules.get(name)
    }

    pub fn rules(&self) -> impl Iterator<Item = &RuleDef> {
        self.rules.values()
    }

    pub fn rules_mut(&mut self) -> impl Iterator<Item = &mut RuleDef> {
        self.rules.values_mut()
    }

    pub fn put_rule(&mut self, rule: RuleDef) {
        self.rules.insert(rule.name.clone(), rule);
    }

    pub fn set_rule_enabled(&mut self, name: &str, enabled: bool) -> Result<(), ModelError> {
        let rule = self
            .rules
            .get_mut(name)
            .ok_or_else(|| ModelError::UnknownRule(name.to_string()))?;
        rule.enabled = enabled;
        Ok(())
    }

    pub fn remove_rule(&mut self, name: &str) -> Result<RuleDef, ModelError> {
        self.rules
            .remove(name)
            .ok_or_else(|| ModelError::UnknownRule(name.to_string()))
    }

    // Users and phones -----------------------------------------------------

    pub fn put_user(&mut self, username: impl Into<String>, credential: Credential) {
        self.users.insert(username.into(), credential);
    }

    pub fn user(&self, username: &str) -> Option<&Credential> {
        self.users.get(username)
    }

    pub fn users(&self) -> impl Iterator<Item = (&String, &Credential)> {
        self.users.iter()
    }

    pub fn allow_phone(&mut self, phone: impl Into<String>) {
        self.allowed_phones.insert(phone.into());
    }

    pub fn phone_allowed(&self, phone: &str) -> bool {
        self.allowed_phones.contains(phone.trim())
    }

    pub fn allowed_phones(&self) -> impl Iterator<Item = &String> {
        self.allowed_phones.iter()
    }

    // Referential integrity -------------------------------------------------

    /// Every dangling reference from scenarios, rules, robot delegations and
    /// the given map icon oids (zero is skipped).
    pub fn integrity_check(&self, map_icon_oids: &[DeviceId]) -> Vec<IntegrityIssue> {
        let mut issues = Vec::new();
        let mut push = |owner: String, missing: String| issues.push(IntegrityIssue { owner, missing });

        let device_named = |n: &str| !self.devices_named(n).is_empty();
        let actor_resolves = |a: &ActorRef| match a {
            ActorRef::Named { name } => device_named(name) || !self.robots_named(name).is_empty(),
            ActorRef::Delegated { robot, device } => !self.robots_named(robot).is_empty() && device_named(device),
        };
        let check_tasks = |owner: &str, tasks: &[Task], push: &mut dyn FnMut(String, String)| {
            for t in tasks {
                match t {
                    Task::Action { actor, .. } if !actor_resolves(actor) => {
                        push(owner.to_string(), format!("actor {actor:?}"))
                    }
                    Task::ScenarioRef { name, .. } if self.scenario(name).is_none() => {
                        push(owner.to_string(), format!("scenario {name}"))
                    }
                    _ => {}
                }
            }
        };

        for s in self.scenarios.values() {
            check_tasks(&format!("scenario {}", s.name), &s.tasks, &mut push);
        }
        for r in self.rules.values() {
            let owner = format!("rule {}", r.name);
            for oid in r.condition.sensors() {
                if !self.devices.contains_key(&oid) {
                    push(owner.clone(), format!("sensor {oid}"));
                }
            }
            check_tasks(&owner, &r.actions, &mut push);
        }
        for robot in self.robots.values() {
            for d in &robot.delegations {
                if !self.devices.contains_key(&d.device_oid) {
                    push(format!("robot {}", robot.name), format!("device {}", d.device_oid));
                }
            }
        }
        for oid in map_icon_oids {
            if oid.0 != 0 && !self.devices.contains_key(oid) {
                push("map".to_string(), format!("device {oid}"));
            }
        }
        issues
    }
}
