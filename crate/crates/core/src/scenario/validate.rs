use std::collections::BTreeSet;
use std::fmt;

use super::ast::{ActorRef, Scenario, Task};
use crate::model::{Actor, DeviceRecord, ParamError, Registry, RobotRecord};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    EmptyScenario,
    InvalidTime,
    UnknownActor(String),
    AmbiguousActor(String),
    UnknownCapability {
        actor: String,
        verb: String,
    },
    BadParam {
        actor: String,
        verb: String,
        error: ParamError,
    },
    UnknownScenario(String),
    Cycle(Vec<String>),
    RobotDisabled(String),
    ActionDisabled {
        robot: String,
        verb: String,
    },
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::EmptyScenario => f.write_str("EMPTY_SCENARIO"),
            ViolationKind::InvalidTime => f.write_str("INVALID_TIME"),
            ViolationKind::UnknownActor(n) => write!(f, "UNKNOWN_ACTOR {n}"),
            ViolationKind::AmbiguousActor(n) => write!(f, "AMBIGUOUS_ACTOR {n}"),
            ViolationKind::UnknownCapability { actor, verb } => {
                write!(f, "UNKNOWN_CAPABILITY {actor}: {verb}")
            }
            ViolationKind::BadParam { actor, verb, error } => {
                write!(f, "BAD_PARAM {actor}: {verb}: {error}")
            }
            ViolationKind::UnknownScenario(n) => write!(f, "UNKNOWN_SCENARIO {n}"),
            ViolationKind::Cycle(path) => write!(f, "CYCLE({})", path.join("→")),
            ViolationKind::RobotDisabled(n) => write!(f, "ROBOT_DISABLED {n}"),
            ViolationKind::ActionDisabled { robot, verb } => {
                write!(f, "ACTION_DISABLED {robot}: {verb}")
            }
        }
    }
}

/// A validation failure located in a scenario (and task, when applicable).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub scenario: String,
    pub task: Option<usize>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} in {}", self.kind, self.scenario)?;
        if let Some(t) = self.task {
            write!(f, " task {}", t + 1)?;
        }
        Ok(())
    }
}

/// An action resolved to registry ids, with the verb in its canonical spelling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResolvedAction {
    pub actor: Actor,
    pub verb: String,
}

fn unique_device<'a>(reg: &'a Registry, name: &str) -> Result<&'a DeviceRecord, ViolationKind> {
    match reg.devices_named(name).as_slice() {
        [d] => Ok(*d),
        [] => Err(ViolationKind::UnknownActor(name.to_string())),
        _ => Err(ViolationKind::AmbiguousActor(name.to_string())),
    }
}

fn unique_robot<'a>(reg: &'a Registry, name: &str) -> Result<&'a RobotRecord, ViolationKind> {
    match reg.robots_named(name).as_slice() {
        [r] => Ok(*r),
        [] => Err(ViolationKind::UnknownActor(name.to_string())),
        _ => Err(ViolationKind::AmbiguousActor(name.to_string())),
    }
}

fn robot_usable(robot: &RobotRecord, verb: &str) -> Result<(), ViolationKind> {
    if !robot.enabled {
        return Err(ViolationKind::RobotDisabled(robot.name.clone()));
    }
    if !robot.action_is_enabled(verb) {
        return Err(ViolationKind::ActionDisabled {
            robot: robot.name.clone(),
            verb: verb.to_string(),
        });
    }
    Ok(())
}

/// Resolve an action against the registry and check it is within the
/// actor's capabilities: device verbs, robot self actions, or robot
/// delegations, plus the verb's parameter domain and enable flags.
pub fn resolve_action(
    reg: &Registry,
    actor: &ActorRef,
    verb: &str,
    param: Option<&str>,
) -> Result<ResolvedAction, ViolationKind> {
    let unknown = |actor: &dyn fmt::Display| ViolationKind::UnknownCapability {
        actor: actor.to_string(),
        verb: verb.to_string(),
    };
    let bad_param = |actor: &dyn fmt::Display, error| ViolationKind::BadParam {
        actor: actor.to_string(),
        verb: verb.to_string(),
        error,
    };
    match actor {
        ActorRef::Named { name } => {
            let device = reg.devices_named(name).len();
            let robot = reg.robots_named(name).len();
            match (device, robot) {
                (0, 0) => Err(ViolationKind::UnknownActor(name.clone())),
                (1, 0) => {
                    let d = unique_device(reg, name)?;
                    let (canonical, domain) = d.verb(verb).ok_or_else(|| unknown(&d.name))?;
                    domain.check(param).map_err(|e| bad_param(&d.name, e))?;
                    Ok(ResolvedAction {
                        actor: Actor::Device(d.oid),
                        verb: canonical.to_string(),
                    })
                }
                (0, 1) => {
                    let r = unique_robot(reg, name)?;
                    let (canonical, domain) = r.self_action(verb).ok_or_else(|| unknown(&r.name))?;
                    robot_usable(r, canonical)?;
                    domain.check(param).map_err(|e| bad_param(&r.name, e))?;
                    Ok(ResolvedAction {
                        actor: Actor::RobotSelf(r.rid),
                        verb: canonical.to_string(),
                    })
                }
                _ => Err(ViolationKind::AmbiguousActor(name.clone())),
            }
        }
        ActorRef::Delegated { robot, device } => {
            let r = unique_robot(reg, robot)?;
            let d = unique_device(reg, device)?;
            let label = format!("{}→{}", r.name, d.name);
            let delegation = r.delegation(d.oid, verb).ok_or_else(|| unknown(&label))?;
            let (canonical, domain) = d.verb(&delegation.verb).ok_or_else(|| unknown(&label))?;
            robot_usable(r, canonical)?;
            domain.check(param).map_err(|e| bad_param(&label, e))?;
            Ok(ResolvedAction {
                actor: Actor::RobotOnDevice(r.rid, d.oid),
                verb: canonical.to_string(),
            })
        }
    }
}

/// Look up a nested scenario, letting `root` shadow a stored scenario of the
/// same name.
pub(crate) fn lookup<'a>(root: &'a Scenario, reg: &'a Registry, name: &str) -> Option<&'a Scenario> {
    if root.name.eq_ignore_ascii_case(name.trim()) {
        Some(root)
    } else {
        reg.scenario(name)
    }
}

/// Every violation reachable from `s`. Empty means `s` is safe to expand.
pub fn validate(s: &Scenario, reg: &Registry) -> Vec<Violation> {
    let mut out = Vec::new();
    find_cycles(s, s, reg, &mut Vec::new(), &mut BTreeSet::new(), &mut out);

    // Content checks over the root and every enabled nested scenario.
    let mut seen = BTreeSet::new();
    let mut pending = vec![s];
    while let Some(current) = pending.pop() {
        if !seen.insert(current.name.to_lowercase()) {
            continue;
        }
        if current.tasks.is_empty() {
            out.push(Violation {
                scenario: current.name.clone(),
                task: None,
                kind: ViolationKind::EmptyScenario,
            });
        }
        for (i, task) in current.tasks.iter().enumerate() {
            let at = |kind| Violation {
                scenario: current.name.clone(),
                task: Some(i),
                kind,
            };
            match task {
                Task::Action {
                    actor,
                    verb,
                    param,
                    time,
                } => {
                    if !time.is_valid() {
                        out.push(at(ViolationKind::InvalidTime));
                    }
                    if let Err(kind) = resolve_action(reg, actor, verb, param.as_deref()) {
                        out.push(at(kind));
                    }
                }
                Task::ScenarioRef { name, override_time } => {
                    if override_time.is_some_and(|t| !t.is_valid()) {
                        out.push(at(ViolationKind::InvalidTime));
                    }
                    match lookup(s, reg, name) {
                        None => out.push(at(ViolationKind::UnknownScenario(name.clone()))),
                        Some(child) if child.enabled => pending.push(child),
                        Some(_) => {}
                    }
                }
            }
        }
    }
    out
}

fn find_cycles(
    root: &Scenario,
    current: &Scenario,
    reg: &Registry,
    stack: &mut Vec<String>,
    done: &mut BTreeSet<String>,
    out: &mut Vec<Violation>,
) {
    stack.push(current.name.clone());
    for name in current.references() {
        let Some(child) = lookup(root, reg, name) else { continue };
        let child_key = child.name.to_lowercase();
        if let Some(pos) = stack.iter().position(|n| n.to_lowercase() == child_key) {
            let mut path = stack[pos..].to_vec();
            path.push(child.name.clone());
            out.push(Violation {
                scenario: root.name.clone(),
                task: None,
                kind: ViolationKind::Cycle(path),
            });
        } else if !done.contains(&child_key) {
            find_cycles(root, child, reg, stack, done, out);
        }
    }
    stack.pop();
    done.insert(current.name.to_lowercase());
}

/// Rewrite names to the registry's spelling so that equivalent submissions
/// compare equal. Unresolvable names are left as written.
pub fn canonicalize(s: &Scenario, reg: &Registry) -> Scenario {
    let device_name = |n: &str| {
        unique_device(reg, n)
            .map(|d| d.name.clone())
            .unwrap_or_else(|_| n.to_string())
    };
    let robot_name = |n: &str| {
        unique_robot(reg, n)
            .map(|r| r.name.clone())
            .unwrap_or_else(|_| n.to_string())
    };
    let tasks = s
        .tasks
        .iter()
        .map(|task| match task {
            Task::Action {
                actor,
                verb,
                param,
                time,
            } => {
                let actor_c = match actor {
                    ActorRef::Named { name } => {
                        let n = if !reg.robots_named(name).is_empty() {
                            robot_name(name)
                        } else {
                            device_name(name)
                        };
                        ActorRef::Named { name: n }
                    }
                    ActorRef::Delegated { robot, device } => ActorRef::Delegated {
                        robot: robot_name(robot),
                        device: device_name(device),
                    },
                };
                let verb_c = resolve_action(reg, actor, verb, param.as_deref())
                    .map(|r| r.verb)
                    .unwrap_or_else(|_| verb.clone());
                Task::Action {
                    actor: actor_c,
                    verb: verb_c,
                    param: param.clone(),
                    time: *time,
                }
            }
            Task::ScenarioRef { name, override_time } => Task::ScenarioRef {
                name: lookup(s, reg, name)
                    .map(|c| c.name.clone())
                    .unwrap_or_else(|| name.clone()),
                override_time: *override_time,
            },
        })
        .collect();
    Scenario {
        name: s.name.trim().to_string(),
        tasks,
        enabled: s.enabled,
    }
}
