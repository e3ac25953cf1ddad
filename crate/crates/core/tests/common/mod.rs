#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::Rng;

use robohome_core::config::ServerConfig;
use robohome_core::home::Home;
use robohome_core::model::{
    Actor, Category, DeviceId, DeviceKind, DeviceRecord, ParamDomain, Registry, RobotId, RobotRecord, Tier,
};
use robohome_core::scenario::{ActorRef, Scenario, Task, TimeSpec};
use robohome_core::time::Instant;
use robohome_core::wire::{decrypt_magic, hash_credentials, RequestEnvelope, Response};

pub fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

pub fn demo_config() -> ServerConfig {
    ServerConfig::load(&demo_dir().join("server.json")).expect("demo config loads")
}

pub fn demo_home() -> Home {
    Home::from_config(&demo_config()).expect("demo home builds")
}

pub fn demo_text(rel: &str) -> String {
    std::fs::read_to_string(demo_dir().join(rel)).expect("demo file reads")
}

/// Handshake and return the magic.
pub fn handshake(home: &mut Home, cfg: &ServerConfig) -> String {
    let r = home.handle(&RequestEnvelope::new("auth.aspx").with("code", cfg.special_code.clone()));
    let lines = r.lines();
    assert_eq!(lines.len(), 2, "handshake reply {r:?}");
    decrypt_magic(&cfg.secret, &lines[0], &lines[1]).expect("magic decrypts")
}

pub fn signed(page: &str, user: &str, pass: &str, magic: &str) -> RequestEnvelope {
    RequestEnvelope::new(page)
        .with("user", user)
        .with("auth", hash_credentials(user, pass, magic))
}

pub fn call(home: &mut Home, magic: &str, page: &str, params: &[(&str, &str)]) -> Response {
    let mut env = signed(page, "admin", "123456", magic);
    for (k, v) in params {
        env = env.with(*k, *v);
    }
    home.handle(&env)
}

/// A registry with a few plain devices and robots for random scenarios.
pub fn small_registry() -> Registry {
    let mut reg = Registry::new();
    for (oid, name) in [(1, "Lamp"), (2, "Fan"), (3, "Heater"), (4, "Pump")] {
        reg.register_device(
            DeviceRecord::new(oid, name, DeviceKind::Actuator, Category::OnOff, Tier::Ambient)
                .with_verb("on", ParamDomain::None)
                .with_verb("off", ParamDomain::None),
        )
        .unwrap();
    }
    reg.register_robot(
        RobotRecord::new(10, "Walker")
            .with_action("GoTo", ParamDomain::Location)
            .with_delegation(1, "on")
            .with_delegation(2, "off"),
    )
    .unwrap();
    reg.register_robot(RobotRecord::new(11, "Picker").with_action("PickUp", ParamDomain::ObjectName))
        .unwrap();
    reg
}

pub fn random_time<R: Rng>(rng: &mut R) -> TimeSpec {
    match rng.random_range(0..3) {
        0 => TimeSpec::Now,
        1 => TimeSpec::at(rng.random_range(0..24), rng.random_range(0..60)),
        _ => TimeSpec::after(rng.random_range(1..600)),
    }
}

/// A random action valid in [`small_registry`].
pub fn random_action<R: Rng>(rng: &mut R) -> Task {
    let time = random_time(rng);
    match rng.random_range(0..5) {
        0 | 1 => {
            let dev = *["Lamp", "Fan", "Heater", "Pump"].choose(rng).unwrap();
            let verb = *["on", "off"].choose(rng).unwrap();
            Task::action(ActorRef::named(dev), verb, None, time)
        }
        2 => {
            let place = *["Hall", "Kitchen", "Saloon", "Garden"].choose(rng).unwrap();
            Task::action(ActorRef::named("Walker"), "GoTo", Some(place), time)
        }
        3 => {
            let (dev, verb) = *[("Lamp", "on"), ("Fan", "off")].choose(rng).unwrap();
            Task::action(ActorRef::delegated("Walker", dev), verb, None, time)
        }
        _ => {
            let thing = *["Cup", "Dishes", "Book"].choose(rng).unwrap();
            Task::action(ActorRef::named("Picker"), "PickUp", Some(thing), time)
        }
    }
}

/// A random acyclic forest of scenarios whose nesting is at most `max_depth`
/// levels deep. Scenario `i` only nests scenarios of a strictly lower
/// level, and level-0 scenarios nest nothing.
pub fn random_forest<R: Rng>(rng: &mut R, max_depth: usize) -> Vec<Scenario> {
    let per_level = rng.random_range(1..=3);
    let mut levels: Vec<Vec<String>> = Vec::new();
    let mut out = Vec::new();
    for level in 0..=max_depth {
        let mut names = Vec::new();
        for k in 0..per_level {
            let name = format!("S{level}{k}");
            let mut tasks = Vec::new();
            for _ in 0..rng.random_range(1..=4) {
                if level > 0 && rng.random_bool(0.45) {
                    let lower = rng.random_range(0..level);
                    let target = levels[lower].choose(rng).unwrap().clone();
                    let ov = rng.random_bool(0.5).then(|| random_time(rng));
                    tasks.push(Task::nested(target, ov));
                } else {
                    tasks.push(random_action(rng));
                }
            }
            let mut s = Scenario::new(name.clone(), tasks);
            // Roots stay enabled; nested scenarios are sometimes switched off.
            s.enabled = level == max_depth || rng.random_bool(0.85);
            names.push(name);
            out.push(s);
        }
        levels.push(names);
    }
    out
}

/// One expected command from brute-force substitution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expected {
    pub due: Instant,
    pub actor: Actor,
    pub verb: String,
    pub param: Option<String>,
    pub provenance: Vec<String>,
}

fn oracle_actor(reg: &Registry, actor: &ActorRef) -> Actor {
    let dev_by_name = |n: &str| reg.devices().find(|d| d.name.eq_ignore_ascii_case(n)).map(|d| d.oid);
    let robot_by_name = |n: &str| reg.robots().find(|r| r.name.eq_ignore_ascii_case(n)).map(|r| r.rid);
    match actor {
        ActorRef::Named { name } => match (dev_by_name(name), robot_by_name(name)) {
            (Some(d), None) => Actor::Device(d),
            (None, Some(r)) => Actor::RobotSelf(r),
            other => panic!("oracle cannot resolve {name}: {other:?}"),
        },
        ActorRef::Delegated { robot, device } => {
            Actor::RobotOnDevice(robot_by_name(robot).unwrap(), dev_by_name(device).unwrap())
        }
    }
}

/// Absolute instant of `t` for an activation at `at`, computed from the
/// calendar rather than through the library's resolver.
pub fn oracle_time(t: &TimeSpec, at: Instant) -> Instant {
    match *t {
        TimeSpec::Now => at,
        TimeSpec::After { minutes } => Instant(at.0 + i64::from(minutes) * 60),
        TimeSpec::At { hour, minute } => {
            let day = at.0.div_euclid(86_400) * 86_400;
            let target = day + i64::from(hour) * 3600 + i64::from(minute) * 60;
            Instant(if target >= at.0 { target } else { target + 86_400 })
        }
    }
}

/// Replace every nested reference by the referenced scenario's tasks with
/// times made absolute, then order by due time and by the index path of the
/// task in the tree.
pub fn oracle_expand(root: &Scenario, at: Instant, reg: &Registry) -> Vec<Expected> {
    let by_name: BTreeMap<String, &Scenario> = reg.scenarios().map(|s| (s.name.to_lowercase(), s)).collect();
    let mut flat: Vec<(Vec<usize>, Expected)> = Vec::new();
    let mut stack: Vec<(&Scenario, Instant, Vec<usize>, Vec<String>)> =
        vec![(root, at, Vec::new(), vec![root.name.clone()])];
    while let Some((s, act, key, prov)) = stack.pop() {
        for (i, task) in s.tasks.iter().enumerate() {
            let mut k = key.clone();
            k.push(i);
            match task {
                Task::Action {
                    actor,
                    verb,
                    param,
                    time,
                } => flat.push((
                    k,
                    Expected {
                        due: oracle_time(time, act),
                        actor: oracle_actor(reg, actor),
                        verb: verb.clone(),
                        param: param.clone(),
                        provenance: prov.clone(),
                    },
                )),
                Task::ScenarioRef { name, override_time } => {
                    let child = by_name[&name.to_lowercase()];
                    if !child.enabled {
                        continue;
                    }
                    let child_at = override_time.as_ref().map_or(act, |t| oracle_time(t, act));
                    let mut p = prov.clone();
                    p.push(child.name.clone());
                    stack.push((child, child_at, k, p));
                }
            }
        }
    }
    flat.sort_by(|a, b| a.1.due.cmp(&b.1.due).then_with(|| a.0.cmp(&b.0)));
    flat.into_iter().map(|(_, e)| e).collect()
}

/// Count false→true transitions of `pred` over `series`, starting from the
/// value before the first sample.
pub fn rising_edges(initial: i64, series: &[i64], pred: impl Fn(i64) -> bool) -> usize {
    let mut prev = pred(initial);
    let mut n = 0;
    for &v in series {
        let now = pred(v);
        if now && !prev {
            n += 1;
        }
        prev = now;
    }
    n
}

pub fn device(reg: &Registry, oid: u32) -> &DeviceRecord {
    reg.device(DeviceId(oid)).expect("device exists")
}

pub fn robot(reg: &Registry, rid: u32) -> &RobotRecord {
    reg.robot(RobotId(rid)).expect("robot exists")
}
