//! Scenario-driven smart-home server: registry, scenario language, rules,
//! scheduler, simulated fleet and the compact client transports.

pub mod config;
pub mod crypto;
pub mod fleet;
pub mod home;
pub mod map;
pub mod model;
pub mod net;
pub mod rules;
pub mod runtime;
pub mod scenario;
pub mod time;
pub mod wire;

#[cfg(test)]
mod fixtures;
