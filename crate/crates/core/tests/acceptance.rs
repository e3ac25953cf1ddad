//! End-to-end acceptance checks against the in-process server, the
//! simulated fleet and the virtual clock. Prints one `[PASS]`/`[FAIL]` line
//! per criterion and exits non-zero if any fail.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use serde_json::Value;

use common::*;
use robohome_core::home::Home;
use robohome_core::map::{HomeMap, MapIconRecord, MapPolyline};
use robohome_core::model::{DeviceId, Tier};
use robohome_core::runtime::{Dispatch, TicketId};
use robohome_core::scenario::{expand, parse_scenario, ActorRef, Scenario, Task, TimeSpec};
use robohome_core::time::Instant;
use robohome_core::wire::tables::CapabilityTables;
use robohome_core::wire::{
    decode_map, decode_request, decode_sms, encode_map, encode_request, encode_sms_scenario, RequestEnvelope, SmsError,
    SmsMessage,
};

type Outcome = Result<(), String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn ticket_entries(home: &Home, ticket: TicketId) -> Vec<Dispatch> {
    home.rt
        .log()
        .entries()
        .iter()
        .filter(|d| d.ticket == ticket)
        .cloned()
        .collect()
}

fn describe(d: &Dispatch) -> (String, String, Option<String>) {
    (d.at.hhmm(), d.command.verb.clone(), d.command.param.clone())
}

fn step(at: &str, verb: &str, param: Option<&str>) -> (String, String, Option<String>) {
    (at.to_string(), verb.to_string(), param.map(str::to_string))
}

fn gather_dishes_trace() -> Outcome {
    let mut home = demo_home();
    let t0 = home.now();
    let id = home
        .rt
        .activate_scenario("Gather Dishes", t0)
        .map_err(|e| e.to_string())?;
    home.tick(t0.plus_minutes(10)).map_err(|e| e.to_string())?;
    let got = ticket_entries(&home, id);
    let offsets: Vec<i64> = got.iter().map(|d| (d.at.secs() - t0.secs()) / 60).collect();
    let exact_minutes = got.iter().all(|d| (d.at.secs() - t0.secs()) % 60 == 0);
    let verbs: Vec<(String, Option<String>)> = got
        .iter()
        .map(|d| (d.command.verb.clone(), d.command.param.clone()))
        .collect();
    let want: Vec<(String, Option<String>)> = [
        ("GoTo", "Saloon"),
        ("PickUp", "Dishes"),
        ("GoTo", "Kitchen"),
        ("PutInto", "WashingMachine"),
        ("GoTo", "DefaultPosition"),
    ]
    .iter()
    .map(|(v, p)| (v.to_string(), Some(p.to_string())))
    .collect();
    ensure!(got.len() == 5, "expected 5 dispatches, got {}", got.len());
    ensure!(exact_minutes && offsets == [0, 2, 5, 6, 7], "offsets {offsets:?}");
    ensure!(verbs == want, "verbs {verbs:?}");
    Ok(())
}

fn clean_home_nesting() -> Outcome {
    let mut home = demo_home();
    let start = home.now();
    let at = start.next_wall_time(9, 50);
    let id = home.rt.activate_scenario("Clean Home", at).map_err(|e| e.to_string())?;
    home.tick(at.plus_minutes(30)).map_err(|e| e.to_string())?;
    let got: Vec<_> = ticket_entries(&home, id).iter().map(describe).collect();
    let want = vec![
        step("09:50", "Clean", Some("Bathtub")),
        step("10:00", "GoTo", Some("Saloon")),
        step("10:02", "PickUp", Some("Dishes")),
        step("10:05", "GoTo", Some("Kitchen")),
        step("10:05", "on", None),
        step("10:05", "Clean", Some("Saloon")),
        step("10:06", "PutInto", Some("WashingMachine")),
        step("10:07", "GoTo", Some("DefaultPosition")),
    ];
    ensure!(got == want, "timeline {got:?}");
    let on = ticket_entries(&home, id)
        .into_iter()
        .find(|d| d.command.verb == "on")
        .unwrap();
    ensure!(
        on.command.actor.code() == "R4>D5",
        "on dispatched by {}",
        on.command.actor.code()
    );
    Ok(())
}

fn watering_plants() -> Outcome {
    let mut home = demo_home();
    let at = home.now().next_wall_time(4, 0);
    let id = home
        .rt
        .activate_scenario("Watering Plants", at)
        .map_err(|e| e.to_string())?;
    home.tick(at.plus_minutes(6 * 60)).map_err(|e| e.to_string())?;
    let got: Vec<(String, String, String)> = ticket_entries(&home, id)
        .iter()
        .map(|d| (d.at.hhmm(), d.command.actor.code(), d.command.verb.clone()))
        .collect();
    let want: Vec<(String, String, String)> = [
        ("05:00", "D1", "on"),
        ("05:30", "D2", "on"),
        ("07:00", "D1", "off"),
        ("09:00", "D2", "off"),
    ]
    .iter()
    .map(|(a, b, c)| (a.to_string(), b.to_string(), c.to_string()))
    .collect();
    ensure!(got == want, "timeline {got:?}");
    Ok(())
}

fn expansion_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0xE4A);
    let mut mismatches = 0;
    let mut checked = 0;
    for case in 0..1000 {
        let depth = rng.random_range(0..=3);
        let forest = random_forest(&mut rng, depth);
        let mut reg = small_registry();
        for s in &forest {
            reg.put_scenario(s.clone());
        }
        let at = Instant(1_767_225_600 + rng.random_range(0..365 * 86_400));
        for root in forest.iter().filter(|s| s.name.starts_with(&format!("S{depth}"))) {
            let got = expand(root, at, &reg).commands;
            let want = oracle_expand(root, at, &reg);
            let same = got.len() == want.len()
                && got.iter().zip(&want).all(|(g, w)| {
                    g.due == w.due
                        && g.actor == w.actor
                        && g.verb == w.verb
                        && g.param == w.param
                        && g.provenance == w.provenance
                });
            checked += 1;
            if !same {
                mismatches += 1;
                if mismatches == 1 {
                    eprintln!("first mismatch in case {case}, root {}", root.name);
                }
            }
        }
    }
    ensure!(mismatches == 0, "{mismatches} of {checked} roots differ");
    Ok(())
}

fn auth_expiry() -> Outcome {
    let cfg = demo_config();
    let mut home = Home::from_config(&cfg).map_err(|e| e.to_string())?;
    let issued = home.now();
    let magic = handshake(&mut home, &cfg);
    let ttl = cfg.ttl;
    ensure!(ttl == 300, "demo ttl is {ttl}");
    home.tick(issued.plus_secs(ttl - 1)).map_err(|e| e.to_string())?;
    let early = call(&mut home, &magic, "status.aspx", &[]);
    ensure!(early.is_ok(), "at +299: {early:?}");
    home.tick(issued.plus_secs(ttl + 1)).map_err(|e| e.to_string())?;
    let late = call(&mut home, &magic, "status.aspx", &[]);
    ensure!(late.code() == "EXPIRED", "at +301: {late:?}");
    let fresh = handshake(&mut home, &cfg);
    let again = call(&mut home, &fresh, "status.aspx", &[]);
    ensure!(again.is_ok(), "after re-handshake: {again:?}");
    Ok(())
}

fn random_text<R: Rng>(rng: &mut R, max: usize) -> String {
    const POOL: &[char] = &[
        'a', 'b', 'Z', '0', '9', ' ', '&', '=', '?', '%', '+', '|', ';', ':', '@', '#', '/', ',', '(', ')', 'é', '→',
        '\n',
    ];
    (0..rng.random_range(0..=max))
        .map(|_| *POOL.choose(rng).unwrap())
        .collect()
}

fn random_map<R: Rng>(rng: &mut R) -> HomeMap {
    let walls = (0..rng.random_range(0..5))
        .map(|_| MapPolyline {
            width: rng.random_range(1..=40),
            rgb: [rng.random(), rng.random(), rng.random()],
            vertices: (0..rng.random_range(2..7))
                .map(|_| (rng.random_range(-5000..5000), rng.random_range(-5000..5000)))
                .collect(),
        })
        .collect();
    let icons = (0..rng.random_range(0..6))
        .map(|_| MapIconRecord {
            oid: DeviceId(rng.random_range(0..50)),
            name: random_text(rng, 12).replace('\n', " "),
            position: (rng.random_range(-5000..5000), rng.random_range(-5000..5000)),
            icon_id: format!("x_{}", rng.random_range(0..10)),
        })
        .collect();
    HomeMap { walls, icons }
}

/// Read `(width, r, g, b)` back out of a `WALL|` line by hand.
fn wall_style(line: &str) -> Option<(u32, u8, u8, u8)> {
    let body = line.strip_prefix("WALL|")?;
    let mut pts = body.split(';');
    let (w, r) = pts.next()?.split_once(',')?;
    let (g, b) = pts.next()?.split_once(',')?;
    Some((w.parse().ok()?, r.parse().ok()?, g.parse().ok()?, b.parse().ok()?))
}

fn random_sms_scenario<R: Rng>(rng: &mut R) -> Scenario {
    let name: String = (0..rng.random_range(1..8))
        .map(|_| *['N', 'x', ' ', '|', ';', '@', ':', '%', '(', '7'].choose(rng).unwrap())
        .collect();
    let name = format!("S{name}");
    let mut tasks = Vec::new();
    for _ in 0..rng.random_range(1..4) {
        if rng.random_bool(0.2) {
            tasks.push(Task::nested("Sub;1", rng.random_bool(0.5).then(|| random_time(rng))));
        } else {
            tasks.push(random_action(rng));
        }
    }
    Scenario::new(name, tasks)
}

fn codec_round_trips() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0xC0DEC);
    let mut failures = Vec::new();
    for i in 0..1000 {
        let map = random_map(&mut rng);
        let lines = encode_map(&map);
        let back = decode_map(lines.iter().map(String::as_str));
        if back.as_ref() != Ok(&map) {
            failures.push(format!("map {i}: {back:?}"));
        }
        for (line, wall) in lines.iter().filter(|l| l.starts_with("WALL|")).zip(&map.walls) {
            let want = (wall.width, wall.rgb[0], wall.rgb[1], wall.rgb[2]);
            if wall_style(line) != Some(want) {
                failures.push(format!("wall style {line}"));
            }
        }
    }
    for i in 0..1000 {
        let page = format!("p{}.aspx", rng.random_range(0..100));
        let mut params: Vec<(String, String)> = Vec::new();
        for k in 0..rng.random_range(0..6) {
            params.push((format!("{}{k}", random_text(&mut rng, 4)), random_text(&mut rng, 20)));
        }
        let line = encode_request(&page, &params);
        match decode_request(&line) {
            Ok(env)
                if env
                    == (RequestEnvelope {
                        page: page.clone(),
                        params: params.clone(),
                    }) => {}
            other => failures.push(format!("request {i}: {line:?} -> {other:?}")),
        }
    }
    let reg = small_registry();
    let mut sms_ok = 0;
    while sms_ok < 1000 {
        let s = random_sms_scenario(&mut rng);
        match encode_sms_scenario(&s, &reg) {
            Ok(body) => {
                sms_ok += 1;
                match decode_sms(&body, &reg) {
                    Ok(back) if back == s => {}
                    other => failures.push(format!("sms {body:?} -> {other:?}")),
                }
            }
            Err(SmsError::TooLong(n)) if n > 160 => {}
            Err(e) => failures.push(format!("sms encode {s:?}: {e}")),
        }
    }
    ensure!(
        failures.is_empty(),
        "{} failures, first: {}",
        failures.len(),
        failures[0]
    );
    Ok(())
}

fn random_demo_scenario<R: Rng>(rng: &mut R, name: String) -> Scenario {
    let mut tasks = Vec::new();
    for _ in 0..rng.random_range(1..=4) {
        let time = random_time(rng);
        tasks.push(match rng.random_range(0..6) {
            0 => Task::action(ActorRef::named("Lamp"), *["on", "off"].choose(rng).unwrap(), None, time),
            1 => Task::action(ActorRef::named("Sprinkler 2"), "on", None, time),
            2 => Task::action(
                ActorRef::named("Mover robot"),
                "GoTo",
                Some(*["Saloon", "Kitchen"].choose(rng).unwrap()),
                time,
            ),
            3 => Task::action(ActorRef::delegated("Home robot", "Door"), "open", None, time),
            4 => Task::action(ActorRef::named("Cleaning robot"), "Clean", Some("Bath;tub"), time),
            _ => Task::nested("Gather Dishes", rng.random_bool(0.5).then(|| random_time(rng))),
        });
    }
    Scenario::new(name, tasks)
}

fn transport_equivalence() -> Outcome {
    let cfg = demo_config();
    let mut gprs = demo_home();
    let mut sms = demo_home();
    let magic = handshake(&mut gprs, &cfg);
    let tables = CapabilityTables::from_lines(
        call(&mut gprs, &magic, "devices.aspx", &[])
            .lines()
            .iter()
            .map(String::as_str),
    );
    let phone = cfg.allowed_phones[0].clone();
    let mut rng = StdRng::seed_from_u64(0x7EA);
    let mut mismatches = Vec::new();
    let mut compared = 0;
    while compared < 200 {
        let s = random_demo_scenario(&mut rng, format!("Random {compared}"));
        let body = match encode_sms_scenario(&s, &tables) {
            Ok(b) => b,
            Err(SmsError::TooLong(_)) => continue,
            Err(e) => return Err(format!("encode failed: {e}")),
        };
        compared += 1;
        let line = encode_request(
            "scenario.aspx",
            &[
                ("user".into(), "admin".into()),
                (
                    "auth".into(),
                    robohome_core::wire::hash_credentials("admin", "123456", &magic),
                ),
                ("action".into(), "add".into()),
                ("body".into(), s.to_string()),
            ],
        );
        let a = gprs.handle_line(&line);
        let b = sms.handle_sms(&SmsMessage {
            sender: phone.clone(),
            body,
        });
        let stored_a = gprs.registry().scenario(&s.name).cloned();
        let stored_b = sms.registry().scenario(&s.name).cloned();
        if !a.is_ok() || !b.is_ok() || stored_a.is_none() || stored_a != stored_b {
            mismatches.push(format!("{}: gprs {a:?} sms {b:?}", s.name));
        }
    }
    ensure!(
        mismatches.is_empty(),
        "{} mismatches, first {}",
        mismatches.len(),
        mismatches[0]
    );

    let mut long = Scenario::new("Long", Vec::new());
    while encode_sms_scenario(&long, &tables).is_ok() {
        long.tasks
            .push(Task::action(ActorRef::named("Lamp"), "on", None, TimeSpec::after(30)));
    }
    match encode_sms_scenario(&long, &tables) {
        Err(SmsError::TooLong(n)) if n > 160 => {}
        other => return Err(format!("long scenario encoded as {other:?}")),
    }
    for len in [161, 162, 200, 480] {
        let body = format!("SC|L|{}", "D8:on@N;".repeat(len))
            .chars()
            .take(len)
            .collect::<String>();
        let r = sms.handle_sms(&SmsMessage {
            sender: phone.clone(),
            body,
        });
        ensure!(r.code() == "SMS_TOO_LONG", "{len}-char body: {r:?}");
    }
    Ok(())
}

fn fleet_json() -> Value {
    serde_json::from_str(&demo_text("fleet.json")).expect("fleet.json parses")
}

fn tiered_polling() -> Outcome {
    let mut home = demo_home();
    let start = home.now();
    home.tick(start.plus_secs(60)).map_err(|e| e.to_string())?;
    let mut by_tier: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for d in fleet_json()["devices"].as_array().unwrap() {
        let oid = d["oid"].as_u64().unwrap() as u32;
        let tier = d["tier"].as_str().unwrap().to_string();
        by_tier.entry(tier).or_default().push(home.rt.poll_count(DeviceId(oid)));
    }
    let want = [("vital", 60), ("security", 12), ("ambient", 1)];
    for (tier, n) in want {
        let counts = by_tier.get(tier).ok_or(format!("demo has no {tier} device"))?;
        ensure!(counts.iter().all(|&c| c == n), "{tier} polled {counts:?}, want {n}");
    }
    ensure!(home.rt.plan().interval(Tier::Vital) <= 1, "vital slower than 1 s");
    Ok(())
}

fn rules_edge_trigger() -> Outcome {
    let fleet = fleet_json();
    let temp = fleet["devices"]
        .as_array()
        .unwrap()
        .iter()
        .find(|d| d["name"] == "temp")
        .unwrap()["oid"]
        .clone();
    let script = fleet["scripts"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["oid"] == temp)
        .unwrap();
    let initial = script["initial"].as_i64().unwrap();
    let points: Vec<(i64, i64)> = script["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| (p[0].as_i64().unwrap(), p[1].as_i64().unwrap()))
        .filter(|&(t, _)| t <= 30)
        .collect();
    let series: Vec<i64> = points.iter().map(|&(_, v)| v).collect();
    ensure!(series == [25, 31, 32, 29, 31], "demo series {series:?}");
    let cadence: Vec<i64> = points.windows(2).map(|w| w[1].0 - w[0].0).collect();
    ensure!(cadence.iter().all(|&c| c == 5), "cadence {cadence:?}");
    let expected = rising_edges(initial, &series, |v| v > 30);

    let mut home = demo_home();
    let start = home.now();
    home.tick(start.plus_secs(30)).map_err(|e| e.to_string())?;
    let fired = home
        .rt
        .log()
        .entries()
        .iter()
        .filter(|d| d.command.provenance == ["rule Too warm"])
        .count();
    ensure!(expected == 2, "oracle counted {expected} edges");
    ensure!(fired == expected, "rule fired {fired} times, expected {expected}");
    Ok(())
}

fn demo_run(dir: &std::path::Path) -> Result<Vec<u8>, String> {
    let mut home = demo_home();
    let start = home.now();
    home.rt
        .activate_scenario("Clean Home", start.next_wall_time(9, 50))
        .map_err(|e| e.to_string())?;
    home.rt
        .activate_scenario("Watering Plants", start)
        .map_err(|e| e.to_string())?;
    home.tick(start.plus_secs(24 * 3600)).map_err(|e| e.to_string())?;
    let path = dir.join("trace.jsonl");
    home.rt.log().write_trace(&path).map_err(|e| e.to_string())?;
    std::fs::read(&path).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = demo_run(a.path())?;
    let second = demo_run(b.path())?;
    ensure!(!first.is_empty(), "empty trace");
    ensure!(
        first == second,
        "traces differ ({} vs {} bytes)",
        first.len(),
        second.len()
    );
    Ok(())
}

fn listings_parse() -> Outcome {
    for f in ["watering_plants", "gather_dishes", "clean_home"] {
        parse_scenario(&demo_text(&format!("scenarios/{f}.txt"))).map_err(|e| format!("{f}: {e}"))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("Gather Dishes trace", gather_dishes_trace),
        ("Clean Home nesting and override", clean_home_nesting),
        ("Watering Plants", watering_plants),
        ("Expansion oracle", expansion_oracle),
        ("Auth expiry", auth_expiry),
        ("Codec round trips", codec_round_trips),
        ("Transport equivalence", transport_equivalence),
        ("Tiered polling", tiered_polling),
        ("Rules edge-trigger", rules_edge_trigger),
        ("Determinism", determinism),
    ];
    if let Err(e) = listings_parse() {
        println!("[FAIL] demo listings: {e}");
        return ExitCode::FAILURE;
    }
    let mut failed = 0;
    for (name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(()) => println!("[PASS] {name}"),
            Err(e) => {
                failed += 1;
                println!("[FAIL] {name}: {e}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
