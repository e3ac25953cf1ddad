use std::collections::BTreeMap;

use super::ast::{Command, Scenario, Task};
use super::validate::{lookup, resolve_action};
use crate::model::{DeviceId, Registry};
use crate::time::Instant;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExpansionNote {
    /// A disabled nested scenario contributed nothing.
    Skipped { scenario: String, provenance: Vec<String> },
    /// Two commands drive the same device with different verbs at the same instant.
    Conflict {
        device: DeviceId,
        at: Instant,
        verbs: (String, String),
    },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Expansion {
    pub commands: Vec<Command>,
    pub notes: Vec<ExpansionNote>,
}

/// Expand a validated scenario into its command timeline.
///
/// Tasks are walked depth-first. A nested scenario is activated at its
/// override time resolved against the parent's activation, or at the
/// parent's activation when it has none. The result is stably sorted by due
/// instant, so simultaneous commands keep their definition order.
pub fn expand(s: &Scenario, activation: Instant, reg: &Registry) -> Expansion {
    let mut out = Expansion::default();
    let mut path = Vec::new();
    walk(s, s, activation, reg, &mut path, &mut out);
    out.commands.sort_by_key(|c| c.due);

    let mut last_verb: BTreeMap<(Instant, DeviceId), &str> = BTreeMap::new();
    let mut conflicts = Vec::new();
    for c in &out.commands {
        if let Some(device) = c.actor.device() {
            if let Some(prev) = last_verb.insert((c.due, device), &c.verb) {
                if !prev.eq_ignore_ascii_case(&c.verb) {
                    log::warn!("CONFLICT on device {device} at {}: {prev} vs {}", c.due, c.verb);
                    conflicts.push(ExpansionNote::Conflict {
                        device,
                        at: c.due,
                        verbs: (prev.to_string(), c.verb.clone()),
                    });
                }
            }
        }
    }
    out.notes.extend(conflicts);
    out
}

fn walk(
    root: &Scenario,
    current: &Scenario,
    activation: Instant,
    reg: &Registry,
    path: &mut Vec<String>,
    out: &mut Expansion,
) {
    path.push(current.name.clone());
    for task in &current.tasks {
        match task {
            Task::Action {
                actor,
                verb,
                param,
                time,
            } => {
                match resolve_action(reg, actor, verb, param.as_deref()) {
                    Ok(resolved) => out.commands.push(Command {
                        due: time.resolve(activation),
                        actor: resolved.actor,
                        verb: resolved.verb,
                        param: param.clone(),
                        provenance: path.clone(),
                    }),
                    // Unreachable after a clean validation.
                    Err(kind) => log::warn!("expand skipped invalid task in {}: {kind}", current.name),
                }
            }
            Task::ScenarioRef { name, override_time } => {
                let Some(child) = lookup(root, reg, name) else {
                    log::warn!("expand skipped unknown scenario {name}");
                    continue;
                };
                if path.iter().any(|p| p.eq_ignore_ascii_case(&child.name)) {
                    log::warn!("expand refused cycle through {}", child.name);
                    continue;
                }
                if !child.enabled {
                    out.notes.push(ExpansionNote::Skipped {
                        scenario: child.name.clone(),
                        provenance: path.clone(),
                    });
                    continue;
                }
                let child_activation = override_time.map_or(activation, |t| t.resolve(activation));
                walk(root, child, child_activation, reg, path, out);
            }
        }
    }
    path.pop();
}
