//! The scenario language: parsing, validation against the registry, and
//! expansion into an absolute command timeline.

mod ast;
mod expand;
mod parse;
mod print;
mod validate;

pub use ast::{ActorRef, Command, Scenario, Task, TimeSpec};
pub use expand::{expand, Expansion, ExpansionNote};
pub(crate) use parse::strip_prefix_ci;
pub use parse::{parse_scenario, parse_task, parse_time, ParseError};
pub use validate::{canonicalize, resolve_action, validate, ResolvedAction, Violation, ViolationKind};
