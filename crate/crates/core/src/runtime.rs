//! The server heartbeat: clock, due-command queue, tiered polling, rule
//! evaluation and dispatch into the fleet.
//!
//! Every second boundary runs three phases in a fixed order: devices whose
//! tier interval divides the elapsed time are polled, rules are evaluated on
//! their cadence, and then every queued command that is due is dispatched.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fleet::{Fleet, Outcome};
use crate::model::{Actor, Attribution, Database, DeviceId, Tier};
use crate::rules::{evaluate, RuleDiagnostic};
use crate::scenario::{expand, validate, Command, ExpansionNote, Scenario, Violation};
use crate::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    Virtual,
    Wall,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Clock {
    now: Instant,
    pub mode: ClockMode,
}

impl Clock {
    pub fn virtual_at(now: Instant) -> Self {
        Clock {
            now,
            mode: ClockMode::Virtual,
        }
    }

    pub fn wall() -> Self {
        Clock {
            now: wall_now(),
            mode: ClockMode::Wall,
        }
    }

    pub fn now(&self) -> Instant {
        self.now
    }
}

pub fn wall_now() -> Instant {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs() as i64);
    Instant(secs)
}

/// Poll interval per vitality tier, in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PollPlan {
    pub vital: i64,
    pub security: i64,
    pub ambient: i64,
}

impl Default for PollPlan {
    fn default() -> Self {
        PollPlan {
            vital: 1,
            security: 5,
            ambient: 60,
        }
    }
}

impl PollPlan {
    pub fn interval(&self, tier: Tier) -> i64 {
        match tier {
            Tier::Vital => self.vital,
            Tier::Security => self.security,
            Tier::Ambient => self.ambient,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if self.vital < 1 || self.security < 1 || self.ambient < 1 {
            return Err("poll intervals must be positive".into());
        }
        if self.vital > 1 {
            return Err("vital devices must be polled at least every second".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TicketId(pub u64);

impl fmt::Display for TicketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dispatch {
    pub at: Instant,
    pub ticket: TicketId,
    pub command: Command,
    pub outcome: Outcome,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    t: String,
    actor: String,
    verb: &'a str,
    param: Option<&'a str>,
    outcome: &'static str,
    provenance: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<&'a str>,
}

impl Dispatch {
    pub fn trace_line(&self) -> String {
        let line = TraceLine {
            t: self.at.to_iso8601(),
            actor: self.command.actor.code(),
            verb: &self.command.verb,
            param: self.command.param.as_deref(),
            outcome: self.outcome.code(),
            provenance: &self.command.provenance,
            detail: self.outcome.detail(),
        };
        serde_json::to_string(&line).expect("trace line serializes")
    }
}

/// Append-only record of dispatched commands.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DispatchLog {
    entries: Vec<Dispatch>,
}

impl DispatchLog {
    fn push(&mut self, d: Dispatch) {
        debug_assert!(self.entries.last().is_none_or(|l| l.at <= d.at));
        self.entries.push(d);
    }

    pub fn entries(&self) -> &[Dispatch] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Line-delimited JSON, one dispatch per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for d in &self.entries {
            out.push_str(&d.trace_line());
            out.push('\n');
        }
        out
    }

    pub fn write_trace(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_jsonl())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("UNKNOWN_SCENARIO {0}")]
    UnknownScenario(String),
    #[error("DISABLED {0}")]
    Disabled(String),
    #[error("VALIDATION_FAILED {}", join(.0))]
    ValidationFailed(Vec<Violation>),
    #[error("UNKNOWN_TICKET {0}")]
    UnknownTicket(TicketId),
    #[error("clock cannot move back from {now} to {requested}")]
    ClockBackwards { now: Instant, requested: Instant },
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// What an activation queued and how far it got.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ticket {
    pub id: TicketId,
    pub source: String,
    pub activated_at: Instant,
    pub total: usize,
    pub dispatched: usize,
    pub cancelled: usize,
    pub notes: Vec<ExpansionNote>,
}

impl Ticket {
    pub fn pending(&self) -> usize {
        self.total - self.dispatched - self.cancelled
    }
}

#[derive(Clone, Debug)]
struct Queued {
    ticket: TicketId,
    cmd: Command,
}

pub struct Runtime {
    clock: Clock,
    origin: Instant,
    plan: PollPlan,
    rule_interval: i64,
    db: Database,
    fleet: Fleet,
    queue: BTreeMap<(Instant, u64), Queued>,
    seq: u64,
    tickets: BTreeMap<TicketId, Ticket>,
    log: DispatchLog,
    polls: BTreeMap<DeviceId, u64>,
    last_actor: BTreeMap<DeviceId, Attribution>,
    diagnostics: Vec<RuleDiagnostic>,
}

impl Runtime {
    /// A runtime starting at the clock's current instant. Every device is read
    /// once and rules see that first picture, so the first evaluation that
    /// follows can only fire on a genuine transition.
    pub fn new(clock: Clock, plan: PollPlan, db: Database, fleet: Fleet) -> Self {
        let mut rt = Runtime {
            origin: clock.now,
            clock,
            plan,
            rule_interval: plan.security,
            db,
            fleet,
            queue: BTreeMap::new(),
            seq: 0,
            tickets: BTreeMap::new(),
            log: DispatchLog::default(),
            polls: BTreeMap::new(),
            last_actor: BTreeMap::new(),
            diagnostics: Vec::new(),
        };
        let now = rt.clock.now;
        rt.fleet.advance(now);
        rt.absorb_changes();
        let oids: Vec<DeviceId> = rt.db.registry().devices().map(|d| d.oid).collect();
        for oid in oids {
            rt.read_device(oid, now);
        }
        let snapshot = rt.db.registry().snapshot(None);
        evaluate(rt.db.registry_mut().rules_mut(), &snapshot, now);
        rt
    }

    pub fn now(&self) -> Instant {
        self.clock.now
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    pub fn plan(&self) -> PollPlan {
        self.plan
    }

    pub fn db(&self) -> &Database {
        &self.db
    }

    pub fn db_mut(&mut self) -> &mut Database {
        &mut self.db
    }

    pub fn fleet(&self) -> &Fleet {
        &self.fleet
    }

    pub fn fleet_mut(&mut self) -> &mut Fleet {
        &mut self.fleet
    }

    pub fn log(&self) -> &DispatchLog {
        &self.log
    }

    pub fn ticket(&self, id: TicketId) -> Option<&Ticket> {
        self.tickets.get(&id)
    }

    pub fn tickets(&self) -> impl Iterator<Item = &Ticket> {
        self.tickets.values()
    }

    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    /// How often `oid` has been polled by `tick`.
    pub fn poll_count(&self, oid: DeviceId) -> u64 {
        self.polls.get(&oid).copied().unwrap_or(0)
    }

    /// Rule diagnostics gathered since the last call.
    pub fn take_diagnostics(&mut self) -> Vec<RuleDiagnostic> {
        std::mem::take(&mut self.diagnostics)
    }

    /// Validate, expand and queue a stored scenario. Commands already due are
    /// dispatched immediately.
    pub fn activate_scenario(&mut self, name: &str, at: Instant) -> Result<TicketId, RuntimeError> {
        let reg = self.db.registry();
        let s = reg
            .scenario(name)
            .ok_or_else(|| RuntimeError::UnknownScenario(name.to_string()))?;
        if !s.enabled {
            return Err(RuntimeError::Disabled(s.name.clone()));
        }
        let s = s.clone();
        let id = self.enqueue(&s, at.max(self.clock.now))?;
        self.dispatch_due(self.clock.now, &mut Vec::new());
        Ok(id)
    }

    fn enqueue(&mut self, s: &Scenario, at: Instant) -> Result<TicketId, RuntimeError> {
        let reg = self.db.registry();
        let violations = validate(s, reg);
        if !violations.is_empty() {
            return Err(RuntimeError::ValidationFailed(violations));
        }
        let expansion = expand(s, at, reg);
        let id = TicketId(self.tickets.len() as u64 + 1);
        self.tickets.insert(
            id,
            Ticket {
                id,
                source: s.name.clone(),
                activated_at: at,
                total: expansion.commands.len(),
                dispatched: 0,
                cancelled: 0,
                notes: expansion.notes,
            },
        );
        for cmd in expansion.commands {
            self.seq += 1;
            self.queue.insert((cmd.due, self.seq), Queued { ticket: id, cmd });
        }
        Ok(id)
    }

    /// Drop the pending commands of an activation.
    pub fn cancel(&mut self, id: TicketId) -> Result<usize, RuntimeError> {
        let ticket = self.tickets.get_mut(&id).ok_or(RuntimeError::UnknownTicket(id))?;
        let before = self.queue.len();
        self.queue.retain(|_, q| q.ticket != id);
        let removed = before - self.queue.len();
        ticket.cancelled += removed;
        Ok(removed)
    }

    /// Advance the clock second by second up to `until`.
    pub fn tick(&mut self, until: Instant) -> Result<Vec<Dispatch>, RuntimeError> {
        if until < self.clock.now {
            return Err(RuntimeError::ClockBackwards {
                now: self.clock.now,
                requested: until,
            });
        }
        let mut delta = Vec::new();
        while self.clock.now < until {
            let now = self.clock.now.plus_secs(1);
            self.clock.now = now;
            self.step(now, &mut delta);
        }
        Ok(delta)
    }

    /// Catch a wall-clock runtime up with the host clock.
    pub fn sync_wall(&mut self) -> Vec<Dispatch> {
        if self.clock.mode != ClockMode::Wall {
            return Vec::new();
        }
        let target = wall_now().max(self.clock.now);
        self.tick(target).unwrap_or_default()
    }

    fn step(&mut self, now: Instant, delta: &mut Vec<Dispatch>) {
        let elapsed = now.secs() - self.origin.secs();
        self.fleet.advance(now);
        self.absorb_changes();

        let due: Vec<DeviceId> = self
            .db
            .registry()
            .devices()
            .filter(|d| elapsed % self.plan.interval(d.tier) == 0)
            .map(|d| d.oid)
            .collect();
        for oid in due {
            *self.polls.entry(oid).or_default() += 1;
            self.read_device(oid, now);
        }

        if elapsed % self.rule_interval == 0 {
            self.run_rules(now);
        }

        self.dispatch_due(now, delta);
    }

    fn read_device(&mut self, oid: DeviceId, now: Instant) {
        let Ok(status) = self.fleet.read(oid, now) else {
            return;
        };
        let by = self.last_actor.get(&oid).copied().unwrap_or(Attribution::Device(oid));
        if let Err(e) = self.db.set_status(oid, status, now, by) {
            log::warn!("poll of {oid} rejected: {e}");
        }
    }

    /// Fold status changes the fleet reported into the registry.
    fn absorb_changes(&mut self) {
        for change in self.fleet.drain_changes() {
            self.last_actor.insert(change.oid, change.by);
            if self.db.registry().device(change.oid).is_none() {
                continue;
            }
            if let Err(e) = self.db.set_status(change.oid, change.status, change.at, change.by) {
                log::warn!("status change of {} rejected: {e}", change.oid);
            }
        }
    }

    fn run_rules(&mut self, now: Instant) {
        let snapshot = self.db.registry().snapshot(None);
        let eval = evaluate(self.db.registry_mut().rules_mut(), &snapshot, now);
        self.diagnostics.extend(eval.diagnostics);
        for fired in eval.fired {
            let s = Scenario::new(format!("rule {}", fired.rule), fired.tasks);
            match self.enqueue(&s, now) {
                Ok(id) => log::info!("rule {} fired at {now}, ticket {id}", fired.rule),
                Err(e) => log::warn!("rule {} fired but was not scheduled: {e}", fired.rule),
            }
        }
    }

    fn dispatch_due(&mut self, now: Instant, delta: &mut Vec<Dispatch>) {
        while let Some(entry) = self.queue.first_entry() {
            if entry.key().0 > now {
                break;
            }
            let Queued { ticket, cmd } = entry.remove();
            let outcome = match self.disabled_reason(&cmd) {
                Some(reason) => Outcome::Skipped(reason),
                None => self.fleet.apply(&cmd, now),
            };
            if let Outcome::DeviceError(e) = &outcome {
                log::warn!("{} {} failed: {e}", cmd.actor, cmd.verb);
            }
            if let Some(t) = self.tickets.get_mut(&ticket) {
                t.dispatched += 1;
            }
            let d = Dispatch {
                at: now,
                ticket,
                command: cmd,
                outcome,
            };
            self.log.push(d.clone());
            delta.push(d);
        }
        self.absorb_changes();
    }

    /// Robots and actions can be switched off after a scenario was queued.
    fn disabled_reason(&self, cmd: &Command) -> Option<String> {
        let rid = cmd.actor.robot()?;
        let robot = self.db.registry().robot(rid)?;
        if !robot.enabled {
            return Some(format!("{} is disabled", robot.name));
        }
        if !robot.action_is_enabled(&cmd.verb) {
            return Some(format!("{} of {} is disabled", cmd.verb, robot.name));
        }
        if let Actor::RobotOnDevice(_, oid) = cmd.actor {
            if robot.delegation(oid, &cmd.verb).is_none() {
                return Some(format!("{} no longer holds {} on {oid}", robot.name, cmd.verb));
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::demo_registry;
    use crate::fleet::{SimDevice, SimRobot};
    use crate::model::{ManageOp, RobotId};

    fn runtime(start: Instant) -> Runtime {
        let reg = demo_registry();
        let mut fleet = Fleet::new(start);
        for d in reg.devices() {
            fleet.add_device(SimDevice::new(d.clone()));
        }
        for r in reg.robots() {
            fleet.add_robot(SimRobot::new(r.clone(), "Dock"));
        }
        Runtime::new(
            Clock::virtual_at(start),
            PollPlan::default(),
            Database::in_memory(reg),
            fleet,
        )
    }

    fn at(h: u32, m: u32) -> Instant {
        Instant::from_ymd_hm(2026, 1, 5, h, m).unwrap()
    }

    #[test]
    fn queue_drains_in_order() {
        let mut rt = runtime(at(9, 59));
        rt.activate_scenario("Gather Dishes", at(10, 0)).unwrap();
        let delta = rt.tick(at(10, 2)).unwrap();
        assert_eq!(delta.len(), 2);
        assert_eq!(delta[0].at, at(10, 0));
        assert_eq!(delta[1].at, at(10, 2));
        assert!(rt.tick(rt.now()).unwrap().is_empty());
    }

    #[test]
    fn cancel_counts_pending() {
        let mut rt = runtime(at(9, 59));
        let t = rt.activate_scenario("Gather Dishes", at(10, 0)).unwrap();
        rt.tick(at(10, 2)).unwrap();
        assert_eq!(rt.cancel(t), Ok(3));
        assert_eq!(rt.cancel(t), Ok(0));
        assert_eq!(rt.cancel(TicketId(99)), Err(RuntimeError::UnknownTicket(TicketId(99))));
        assert_eq!(rt.ticket(t).unwrap().pending(), 0);
    }

    #[test]
    fn activation_errors() {
        let mut rt = runtime(at(9, 0));
        rt.db_mut()
            .mutate(|r| r.manage_scenario("Watering Plants", ManageOp::Disable))
            .unwrap();
        assert_eq!(
            rt.activate_scenario("Watering Plants", at(9, 0)),
            Err(RuntimeError::Disabled("Watering Plants".into()))
        );
        assert!(matches!(
            rt.activate_scenario("Nope", at(9, 0)),
            Err(RuntimeError::UnknownScenario(_))
        ));
        rt.db_mut().mutate(|r| r.remove_device(DeviceId(5))).unwrap();
        assert!(matches!(
            rt.activate_scenario("Clean Home", at(9, 0)),
            Err(RuntimeError::ValidationFailed(_))
        ));
    }

    #[test]
    fn robot_disabled_after_queueing_is_skipped() {
        let mut rt = runtime(at(9, 59));
        rt.activate_scenario("Gather Dishes", at(10, 0)).unwrap();
        rt.db_mut()
            .mutate(|r| r.set_robot_enabled(RobotId(3), None, false))
            .unwrap();
        let delta = rt.tick(at(10, 0)).unwrap();
        assert_eq!(delta[0].outcome.code(), "SKIPPED");
    }

    #[test]
    fn due_now_dispatches_immediately() {
        let mut rt = runtime(at(10, 0));
        rt.activate_scenario("Gather Dishes", at(10, 0)).unwrap();
        assert_eq!(rt.log().len(), 1);
        assert_eq!(rt.log().entries()[0].at, at(10, 0));
    }

    #[test]
    fn clock_never_moves_back() {
        let mut rt = runtime(at(10, 0));
        assert!(rt.tick(at(9, 0)).is_err());
    }

    #[test]
    fn lamp_change_reaches_registry_on_dispatch() {
        let mut rt = runtime(at(10, 0));
        let s = crate::scenario::parse_scenario("Scenario name: Light\nLamp: on @ Now").unwrap();
        rt.db_mut()
            .mutate::<_, crate::model::ModelError>(|r| {
                r.put_scenario(s);
                Ok(())
            })
            .unwrap();
        rt.activate_scenario("Light", at(10, 0)).unwrap();
        let lamp = rt.db().registry().device(DeviceId(8)).unwrap();
        assert_eq!(lamp.status.label(), "On");
        assert_eq!(rt.db().journal().len(DeviceId(8)), 1);
    }
}
