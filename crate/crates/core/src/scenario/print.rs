use std::fmt;

use super::ast::{ActorRef, Scenario, Task, TimeSpec};

impl fmt::Display for TimeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeSpec::Now => f.write_str("Now"),
            TimeSpec::At { hour, minute } => write!(f, "{hour:02}:{minute:02}"),
            TimeSpec::After { minutes } => write!(f, "In {minutes} Minutes"),
        }
    }
}

impl fmt::Display for ActorRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActorRef::Named { name } => f.write_str(name),
            ActorRef::Delegated { robot, device } => write!(f, "{robot}→{device}"),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Action {
                actor,
                verb,
                param,
                time,
            } => {
                write!(f, "{actor}: {verb}")?;
                if let Some(p) = param {
                    write!(f, " ({p})")?;
                }
                write!(f, " @ {time}")
            }
            Task::ScenarioRef { name, override_time } => {
                write!(f, "[{name}]")?;
                if let Some(t) = override_time {
                    write!(f, " @ {t}")?;
                }
                Ok(())
            }
        }
    }
}

/// Letter ordinals A..Z, then numbers.
fn ordinal(index: usize) -> String {
    if index < 26 {
        char::from(b'A' + index as u8).to_string()
    } else {
        (index + 1).to_string()
    }
}

/// Canonical text form: 24-hour times, `→` arrows, letter ordinals.
impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Scenario name: {}", self.name)?;
        for (i, task) in self.tasks.iter().enumerate() {
            writeln!(f, "{}. {task}", ordinal(i))?;
        }
        Ok(())
    }
}
