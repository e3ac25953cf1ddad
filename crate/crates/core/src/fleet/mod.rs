//! Deterministic simulated devices and robots.
//!
//! Devices either hold the last commanded state (latched) or follow a
//! configured time series (scripted sensors). Robots execute commands one at
//! a time in arrival order; each job keeps the robot busy for its configured
//! latency.

mod config;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::map::HomeMap;
use crate::model::{
    Actor, Attribution, Category, DeviceId, DeviceKind, DeviceRecord, RobotId, RobotRecord, StatusChange, StatusValue,
};
use crate::scenario::Command;
use crate::time::Instant;

pub use config::{
    load_fleet, status_from_json, status_from_label, ConfigError, DeviceConfig, FleetConfig, RobotConfig, ScriptConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Behavior {
    Latched,
    Scripted,
}

/// A step series: each point holds from its offset until the next one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Script {
    pub initial: StatusValue,
    /// (seconds after the fleet origin, value), ascending.
    pub points: Vec<(i64, StatusValue)>,
}

impl Script {
    pub fn value_at(&self, offset: i64) -> &StatusValue {
        self.points
            .iter()
            .take_while(|(t, _)| *t <= offset)
            .last()
            .map_or(&self.initial, |(_, v)| v)
    }
}

#[derive(Clone, Debug)]
pub struct SimDevice {
    pub record: DeviceRecord,
    pub room: Option<String>,
    pub behavior: Behavior,
    pub action_latency: BTreeMap<String, i64>,
    script: Option<Script>,
    state: StatusValue,
    /// Final state of an in-progress action, its completion instant and actor.
    pending: Option<(Instant, StatusValue, Attribution)>,
}

impl SimDevice {
    pub fn new(record: DeviceRecord) -> Self {
        SimDevice {
            state: record.status.clone(),
            record,
            room: None,
            behavior: Behavior::Latched,
            action_latency: BTreeMap::new(),
            script: None,
            pending: None,
        }
    }

    pub fn with_script(mut self, script: Script) -> Self {
        self.behavior = Behavior::Scripted;
        self.script = Some(script);
        self
    }

    pub fn in_room(mut self, room: impl Into<String>) -> Self {
        self.room = Some(room.into());
        self
    }

    pub fn with_latency(mut self, verb: impl Into<String>, secs: i64) -> Self {
        self.action_latency.insert(verb.into(), secs.max(0));
        self
    }

    fn latency(&self, verb: &str) -> i64 {
        self.action_latency
            .iter()
            .find(|(v, _)| v.eq_ignore_ascii_case(verb))
            .map_or(0, |(_, s)| *s)
    }

    /// The state `verb` drives this device to.
    fn target(&self, verb: &str, param: Option<&str>) -> Result<StatusValue, String> {
        let v = verb.to_ascii_lowercase();
        let cat = self.record.category;
        let target = match (cat, v.as_str()) {
            (Category::OnOff, "on") => StatusValue::Binary { on: true },
            (Category::OnOff, "off") => StatusValue::Binary { on: false },
            (Category::OnOff, "toggle") => StatusValue::Binary {
                on: !matches!(self.state, StatusValue::Binary { on: true }),
            },
            (Category::OpenedClosed, "open") => StatusValue::Aperture { open: true },
            (Category::OpenedClosed, "close") => StatusValue::Aperture { open: false },
            (Category::AppearingDisappearing, "appear" | "show") => StatusValue::Presence { present: true },
            (Category::AppearingDisappearing, "disappear" | "hide") => StatusValue::Presence { present: false },
            (Category::Leveled, _) => {
                let level = param
                    .and_then(|p| p.trim().parse::<i64>().ok())
                    .ok_or_else(|| format!("{verb} needs an integer level"))?;
                StatusValue::Level { value: level }
            }
            (Category::Custom, _) => StatusValue::Text {
                label: param.unwrap_or(verb).to_string(),
            },
            _ => return Err(format!("no {} transition for verb {verb}", cat.as_str())),
        };
        Ok(target)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RobotStatus {
    Idle,
    Busy { job: String },
}

impl fmt::Display for RobotStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RobotStatus::Idle => f.write_str("Idle"),
            RobotStatus::Busy { job } => write!(f, "Busy({job})"),
        }
    }
}

#[derive(Clone, Debug)]
struct Job {
    cmd: Command,
    until: Instant,
    /// Room reached when the job completes.
    destination: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SimRobot {
    pub record: RobotRecord,
    pub location: String,
    pub action_latency: BTreeMap<String, i64>,
    pub travel_seconds: BTreeMap<String, i64>,
    busy_until: Option<Instant>,
    current: Option<Job>,
    queue: VecDeque<Command>,
    status: RobotStatus,
    completed: Vec<Command>,
}

impl SimRobot {
    pub fn new(record: RobotRecord, location: impl Into<String>) -> Self {
        SimRobot {
            record,
            location: location.into(),
            action_latency: BTreeMap::new(),
            travel_seconds: BTreeMap::new(),
            busy_until: None,
            current: None,
            queue: VecDeque::new(),
            status: RobotStatus::Idle,
            completed: Vec::new(),
        }
    }

    pub fn with_latency(mut self, verb: impl Into<String>, secs: i64) -> Self {
        self.action_latency.insert(verb.into(), secs.max(0));
        self
    }

    pub fn with_travel(mut self, room: impl Into<String>, secs: i64) -> Self {
        self.travel_seconds.insert(room.into(), secs.max(0));
        self
    }

    pub fn status(&self) -> &RobotStatus {
        &self.status
    }

    pub fn busy_until(&self) -> Option<Instant> {
        self.busy_until
    }

    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    /// Commands finished so far, in completion order.
    pub fn completed(&self) -> &[Command] {
        &self.completed
    }

    fn latency(&self, verb: &str) -> i64 {
        self.action_latency
            .iter()
            .find(|(v, _)| v.eq_ignore_ascii_case(verb))
            .map_or(0, |(_, s)| *s)
    }

    fn travel(&self, room: &str) -> Option<i64> {
        self.travel_seconds
            .iter()
            .find(|(r, _)| r.eq_ignore_ascii_case(room))
            .map(|(_, s)| *s)
    }
}

/// Result of applying one command.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    DeviceError(String),
    Skipped(String),
}

impl Outcome {
    pub fn code(&self) -> &'static str {
        match self {
            Outcome::Ok => "OK",
            Outcome::DeviceError(_) => "DEVICE_ERROR",
            Outcome::Skipped(_) => "SKIPPED",
        }
    }

    pub fn detail(&self) -> Option<&str> {
        match self {
            Outcome::Ok => None,
            Outcome::DeviceError(d) | Outcome::Skipped(d) => Some(d),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FleetError {
    #[error("UNKNOWN_OID {0}")]
    UnknownOid(DeviceId),
}

#[derive(Clone, Debug, Default)]
pub struct Fleet {
    origin: Instant,
    devices: BTreeMap<DeviceId, SimDevice>,
    robots: BTreeMap<RobotId, SimRobot>,
    changes: Vec<StatusChange>,
    map: HomeMap,
}

impl Fleet {
    /// Script offsets are measured from `origin`.
    pub fn new(origin: Instant) -> Self {
        Fleet {
            origin,
            ..Default::default()
        }
    }

    pub fn origin(&self) -> Instant {
        self.origin
    }

    pub fn map(&self) -> &HomeMap {
        &self.map
    }

    pub fn add_device(&mut self, device: SimDevice) {
        self.devices.insert(device.record.oid, device);
    }

    pub fn add_robot(&mut self, robot: SimRobot) {
        self.robots.insert(robot.record.rid, robot);
    }

    pub fn device(&self, oid: DeviceId) -> Option<&SimDevice> {
        self.devices.get(&oid)
    }

    pub fn robot(&self, rid: RobotId) -> Option<&SimRobot> {
        self.robots.get(&rid)
    }

    pub fn robots(&self) -> impl Iterator<Item = &SimRobot> {
        self.robots.values()
    }

    /// Forget a device removed from the registry.
    pub fn remove_device(&mut self, oid: DeviceId) {
        self.devices.remove(&oid);
    }

    /// Status changes produced since the last drain, in the order they happened.
    pub fn drain_changes(&mut self) -> Vec<StatusChange> {
        std::mem::take(&mut self.changes)
    }

    pub fn read(&self, oid: DeviceId, at: Instant) -> Result<StatusValue, FleetError> {
        let dev = self.devices.get(&oid).ok_or(FleetError::UnknownOid(oid))?;
        Ok(match (&dev.behavior, &dev.script) {
            (Behavior::Scripted, Some(script)) => script.value_at(at.secs() - self.origin.secs()).clone(),
            _ => dev.state.clone(),
        })
    }

    pub fn apply(&mut self, cmd: &Command, at: Instant) -> Outcome {
        match cmd.actor {
            Actor::Device(oid) => match self.check_device_verb(oid, &cmd.verb) {
                Ok(()) => self.drive_device(oid, &cmd.verb, cmd.param.as_deref(), at, Attribution::Device(oid)),
                Err(e) => Outcome::DeviceError(e),
            },
            Actor::RobotSelf(rid) => {
                let Some(robot) = self.robots.get(&rid) else {
                    return Outcome::DeviceError(format!("no robot {rid}"));
                };
                if robot.record.self_action(&cmd.verb).is_none() {
                    return Outcome::DeviceError(format!("{} cannot {}", robot.record.name, cmd.verb));
                }
                self.enqueue(rid, cmd.clone(), at)
            }
            Actor::RobotOnDevice(rid, oid) => {
                if !self.robots.contains_key(&rid) {
                    return Outcome::DeviceError(format!("no robot {rid}"));
                }
                if let Err(e) = self.check_device_verb(oid, &cmd.verb) {
                    return Outcome::DeviceError(e);
                }
                self.enqueue(rid, cmd.clone(), at)
            }
        }
    }

    fn check_device_verb(&self, oid: DeviceId, verb: &str) -> Result<(), String> {
        let dev = self.devices.get(&oid).ok_or_else(|| format!("no device {oid}"))?;
        if dev.record.kind == DeviceKind::Sensor {
            return Err(format!("{} is a sensor and accepts no commands", dev.record.name));
        }
        if dev.record.verb(verb).is_none() {
            return Err(format!("{} does not accept {verb}", dev.record.name));
        }
        Ok(())
    }

    fn drive_device(
        &mut self,
        oid: DeviceId,
        verb: &str,
        param: Option<&str>,
        at: Instant,
        by: Attribution,
    ) -> Outcome {
        let Some(dev) = self.devices.get_mut(&oid) else {
            return Outcome::DeviceError(format!("no device {oid}"));
        };
        let target = match dev.target(verb, param) {
            Ok(t) => t,
            Err(e) => return Outcome::DeviceError(e),
        };
        let latency = dev.latency(verb);
        let immediate = if latency == 0 {
            dev.pending = None;
            target
        } else {
            dev.pending = Some((at.plus_secs(latency), target, by));
            StatusValue::Busy {
                job: format!("{verb} {}", dev.record.name),
            }
        };
        dev.state = immediate.clone();
        self.changes.push(StatusChange {
            at,
            oid,
            status: immediate,
            by,
        });
        Outcome::Ok
    }

    fn enqueue(&mut self, rid: RobotId, cmd: Command, at: Instant) -> Outcome {
        if let Some(robot) = self.robots.get_mut(&rid) {
            robot.queue.push_back(cmd);
        }
        self.run_robot(rid, at);
        Outcome::Ok
    }

    /// Complete due work and start queued jobs up to `now`.
    pub fn advance(&mut self, now: Instant) {
        let due: Vec<DeviceId> = self
            .devices
            .iter()
            .filter(|(_, d)| d.pending.as_ref().is_some_and(|(t, _, _)| *t <= now))
            .map(|(oid, _)| *oid)
            .collect();
        for oid in due {
            if let Some(dev) = self.devices.get_mut(&oid) {
                if let Some((at, status, by)) = dev.pending.take() {
                    dev.state = status.clone();
                    self.changes.push(StatusChange { at, oid, status, by });
                }
            }
        }
        let rids: Vec<RobotId> = self.robots.keys().copied().collect();
        for rid in rids {
            self.run_robot(rid, now);
        }
    }

    fn run_robot(&mut self, rid: RobotId, now: Instant) {
        loop {
            let Some(robot) = self.robots.get_mut(&rid) else { return };
            // Finish the current job if its time has come.
            if let Some(job) = &robot.current {
                if job.until > now {
                    return;
                }
                let job = robot.current.take().expect("current job");
                if let Some(room) = &job.destination {
                    robot.location = room.clone();
                }
                robot.status = RobotStatus::Idle;
                robot.busy_until = None;
                let finished_at = job.until;
                if let Actor::RobotOnDevice(_, oid) = job.cmd.actor {
                    self.drive_device(
                        oid,
                        &job.cmd.verb,
                        job.cmd.param.as_deref(),
                        finished_at,
                        Attribution::Robot(rid),
                    );
                }
                let robot = self.robots.get_mut(&rid).expect("robot");
                robot.completed.push(job.cmd);
                continue;
            }
            let Some(cmd) = robot.queue.pop_front() else { return };
            let start = robot.busy_until.unwrap_or(now).min(now);
            let (duration, destination, job_label) = match cmd.actor {
                Actor::RobotOnDevice(_, oid) => {
                    let dev = self.devices.get(&oid);
                    let room = dev.and_then(|d| d.room.clone());
                    let name = dev.map_or_else(|| oid.to_string(), |d| d.record.name.clone());
                    let robot = self.robots.get(&rid).expect("robot");
                    let travel = match &room {
                        Some(r) if !r.eq_ignore_ascii_case(&robot.location) => robot.travel(r).unwrap_or(0),
                        _ => 0,
                    };
                    (travel, room, format!("{} {name}", cmd.verb))
                }
                _ => {
                    let robot = self.robots.get(&rid).expect("robot");
                    let label = match &cmd.param {
                        Some(p) => format!("{} {p}", cmd.verb),
                        None => cmd.verb.clone(),
                    };
                    if cmd.verb.eq_ignore_ascii_case("goto") {
                        let room = cmd.param.clone().unwrap_or_default();
                        let secs = robot.travel(&room).unwrap_or_else(|| robot.latency(&cmd.verb));
                        (secs, Some(room), label)
                    } else {
                        (robot.latency(&cmd.verb), None, label)
                    }
                }
            };
            let robot = self.robots.get_mut(&rid).expect("robot");
            let until = start.plus_secs(duration);
            robot.status = RobotStatus::Busy { job: job_label };
            robot.busy_until = Some(until);
            robot.current = Some(Job {
                cmd,
                until,
                destination,
            });
        }
    }

    /// Registry records for every simulated device and robot.
    pub fn records(&self) -> (Vec<DeviceRecord>, Vec<RobotRecord>) {
        (
            self.devices.values().map(|d| d.record.clone()).collect(),
            self.robots.values().map(|r| r.record.clone()).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ParamDomain, Tier};

    fn cmd(actor: Actor, verb: &str, param: Option<&str>, due: i64) -> Command {
        Command {
            due: Instant(due),
            actor,
            verb: verb.into(),
            param: param.map(str::to_string),
            provenance: vec!["test".into()],
        }
    }

    fn fleet() -> Fleet {
        let mut f = Fleet::new(Instant(0));
        let washer = DeviceRecord::new(
            5,
            "Washing machine",
            DeviceKind::Actuator,
            Category::OnOff,
            Tier::Ambient,
        )
        .with_verb("on", ParamDomain::None)
        .with_verb("off", ParamDomain::None);
        f.add_device(SimDevice::new(washer).in_room("Kitchen"));
        let lamp = DeviceRecord::new(8, "Lamp", DeviceKind::Actuator, Category::OnOff, Tier::Ambient)
            .with_verb("on", ParamDomain::None);
        f.add_device(SimDevice::new(lamp));
        let temp = DeviceRecord::new(6, "temp", DeviceKind::Sensor, Category::Leveled, Tier::Security);
        let script = Script {
            initial: StatusValue::Level { value: 20 },
            points: vec![
                (0, StatusValue::Level { value: 25 }),
                (30, StatusValue::Level { value: 31 }),
            ],
        };
        f.add_device(SimDevice::new(temp).with_script(script));
        let cleaner = RobotRecord::new(2, "Cleaning robot").with_action("Clean", ParamDomain::ObjectName);
        f.add_robot(SimRobot::new(cleaner, "Dock").with_latency("Clean", 120));
        let home = RobotRecord::new(3, "Home robot").with_delegation(5, "on");
        f.add_robot(SimRobot::new(home, "Hall").with_travel("Kitchen", 20));
        f
    }

    #[test]
    fn cleaning_keeps_robot_busy_for_latency() {
        let mut f = fleet();
        let out = f.apply(
            &cmd(Actor::RobotSelf(RobotId(2)), "Clean", Some("Bathtub"), 100),
            Instant(100),
        );
        assert_eq!(out, Outcome::Ok);
        let r = f.robot(RobotId(2)).unwrap();
        assert_eq!(
            r.status(),
            &RobotStatus::Busy {
                job: "Clean Bathtub".into()
            }
        );
        assert_eq!(r.busy_until(), Some(Instant(220)));
        f.advance(Instant(219));
        assert!(matches!(
            f.robot(RobotId(2)).unwrap().status(),
            RobotStatus::Busy { .. }
        ));
        f.advance(Instant(220));
        assert_eq!(f.robot(RobotId(2)).unwrap().status(), &RobotStatus::Idle);
    }

    #[test]
    fn delegated_action_is_attributed_to_robot() {
        let mut f = fleet();
        let c = cmd(Actor::RobotOnDevice(RobotId(3), DeviceId(5)), "on", None, 0);
        assert_eq!(f.apply(&c, Instant(0)), Outcome::Ok);
        // The robot walks to the kitchen first.
        assert_eq!(
            f.read(DeviceId(5), Instant(0)).unwrap(),
            StatusValue::Binary { on: false }
        );
        f.advance(Instant(20));
        assert_eq!(
            f.read(DeviceId(5), Instant(20)).unwrap(),
            StatusValue::Binary { on: true }
        );
        assert_eq!(f.robot(RobotId(3)).unwrap().location, "Kitchen");
        let changes = f.drain_changes();
        assert_eq!(changes.len(), 1);
        assert_eq!(changes[0].by, Attribution::Robot(RobotId(3)));
        assert_eq!(changes[0].at, Instant(20));
    }

    #[test]
    fn sensor_rejects_commands() {
        let mut f = fleet();
        let out = f.apply(&cmd(Actor::Device(DeviceId(6)), "on", None, 0), Instant(0));
        assert!(matches!(out, Outcome::DeviceError(_)));
    }

    #[test]
    fn scripted_reads_step_and_hold() {
        let f = fleet();
        assert_eq!(
            f.read(DeviceId(6), Instant(40)).unwrap(),
            StatusValue::Level { value: 31 }
        );
        assert_eq!(
            f.read(DeviceId(6), Instant(29)).unwrap(),
            StatusValue::Level { value: 25 }
        );
        assert_eq!(
            f.read(DeviceId(6), Instant(-5)).unwrap(),
            StatusValue::Level { value: 20 }
        );
        assert_eq!(
            f.read(DeviceId(99), Instant(0)),
            Err(FleetError::UnknownOid(DeviceId(99)))
        );
    }

    #[test]
    fn latched_lamp() {
        let mut f = fleet();
        f.apply(&cmd(Actor::Device(DeviceId(8)), "on", None, 0), Instant(0));
        assert_eq!(
            f.read(DeviceId(8), Instant(1)).unwrap(),
            StatusValue::Binary { on: true }
        );
        assert_eq!(f.drain_changes()[0].by, Attribution::Device(DeviceId(8)));
    }

    #[test]
    fn busy_robot_queues_in_order() {
        let mut f = fleet();
        let r = Actor::RobotSelf(RobotId(2));
        f.apply(&cmd(r, "Clean", Some("Bathtub"), 0), Instant(0));
        f.apply(&cmd(r, "Clean", Some("Saloon"), 10), Instant(10));
        f.apply(&cmd(r, "Clean", Some("Kitchen"), 20), Instant(20));
        assert_eq!(f.robot(RobotId(2)).unwrap().queued(), 2);
        for t in 21..=360 {
            f.advance(Instant(t));
        }
        let done: Vec<_> = f
            .robot(RobotId(2))
            .unwrap()
            .completed()
            .iter()
            .map(|c| c.param.clone().unwrap())
            .collect();
        assert_eq!(done, vec!["Bathtub", "Saloon", "Kitchen"]);
        assert_eq!(f.robot(RobotId(2)).unwrap().status(), &RobotStatus::Idle);
    }

    #[test]
    fn device_latency_reports_busy() {
        let mut f = Fleet::new(Instant(0));
        let door = DeviceRecord::new(
            7,
            "Door",
            DeviceKind::ActuatorSensor,
            Category::OpenedClosed,
            Tier::Security,
        )
        .with_verb("close", ParamDomain::None)
        .with_verb("open", ParamDomain::None);
        f.add_device(SimDevice::new(door).with_latency("close", 3));
        f.apply(&cmd(Actor::Device(DeviceId(7)), "open", None, 0), Instant(0));
        f.apply(&cmd(Actor::Device(DeviceId(7)), "close", None, 1), Instant(1));
        assert_eq!(
            f.read(DeviceId(7), Instant(1)).unwrap(),
            StatusValue::Busy {
                job: "close Door".into()
            }
        );
        f.advance(Instant(4));
        assert_eq!(
            f.read(DeviceId(7), Instant(4)).unwrap(),
            StatusValue::Aperture { open: false }
        );
    }
}
