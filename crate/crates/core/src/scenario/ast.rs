use serde::{Deserialize, Serialize};

use crate::model::Actor;
use crate::time::Instant;

/// When a task runs, relative to the activation instant of its scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeSpec {
    Now,
    /// Wall-clock time of day, 24-hour.
    At {
        hour: u8,
        minute: u8,
    },
    /// Whole minutes after activation, at least one.
    After {
        minutes: u32,
    },
}

impl TimeSpec {
    pub fn at(hour: u8, minute: u8) -> Self {
        TimeSpec::At { hour, minute }
    }

    pub fn after(minutes: u32) -> Self {
        TimeSpec::After { minutes }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            TimeSpec::Now => true,
            TimeSpec::At { hour, minute } => hour < 24 && minute < 60,
            TimeSpec::After { minutes } => minutes >= 1,
        }
    }

    /// Absolute instant of this time for a scenario activated at `activation`.
    /// Clock times already passed that day roll over to the next day.
    pub fn resolve(&self, activation: Instant) -> Instant {
        match *self {
            TimeSpec::Now => activation,
            TimeSpec::At { hour, minute } => activation.next_wall_time(hour, minute),
            TimeSpec::After { minutes } => activation.plus_minutes(i64::from(minutes)),
        }
    }
}

/// An actor as written in scenario text, before resolution against the registry.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActorRef {
    /// A device, or a robot acting on its own.
    Named { name: String },
    /// A robot operating a device.
    Delegated { robot: String, device: String },
}

impl ActorRef {
    pub fn named(name: impl Into<String>) -> Self {
        ActorRef::Named { name: name.into() }
    }

    pub fn delegated(robot: impl Into<String>, device: impl Into<String>) -> Self {
        ActorRef::Delegated {
            robot: robot.into(),
            device: device.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Action {
        actor: ActorRef,
        verb: String,
        #[serde(default)]
        param: Option<String>,
        time: TimeSpec,
    },
    ScenarioRef {
        name: String,
        #[serde(default)]
        override_time: Option<TimeSpec>,
    },
}

impl Task {
    pub fn action(actor: ActorRef, verb: impl Into<String>, param: Option<&str>, time: TimeSpec) -> Self {
        Task::Action {
            actor,
            verb: verb.into(),
            param: param.map(str::to_string),
            time,
        }
    }

    pub fn nested(name: impl Into<String>, override_time: Option<TimeSpec>) -> Self {
        Task::ScenarioRef {
            name: name.into(),
            override_time,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub tasks: Vec<Task>,
    #[serde(default = "enabled_default")]
    pub enabled: bool,
}

fn enabled_default() -> bool {
    true
}

impl Scenario {
    pub fn new(name: impl Into<String>, tasks: Vec<Task>) -> Self {
        Scenario {
            name: name.into(),
            tasks,
            enabled: true,
        }
    }

    /// Names of the scenarios this one nests directly, in task order.
    pub fn references(&self) -> impl Iterator<Item = &str> {
        self.tasks.iter().filter_map(|t| match t {
            Task::ScenarioRef { name, .. } => Some(name.as_str()),
            Task::Action { .. } => None,
        })
    }
}

/// A fully resolved actuation ready for dispatch.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Command {
    pub due: Instant,
    pub actor: Actor,
    pub verb: String,
    pub param: Option<String>,
    /// Scenario names from the activated root down to the defining scenario.
    pub provenance: Vec<String>,
}
