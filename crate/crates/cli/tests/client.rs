use std::cell::Cell;
use std::path::{Path, PathBuf};
use std::rc::Rc;

use robohome_cli::ascii::{self, Scale};
use robohome_cli::{Client, ClientState, Staleness};
use robohome_core::config::ServerConfig;
use robohome_core::home::Home;
use robohome_core::wire::Response;

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

fn demo_config() -> ServerConfig {
    ServerConfig::load(&demo_dir().join("server.json")).unwrap()
}

fn client_for(home: Home, cfg: &ServerConfig, password: &str) -> Client<Home> {
    let state = ClientState::new("in-process", cfg.special_code.clone(), "admin");
    Client::new(home, state, cfg.secret.clone(), password)
}

/// A client whose clock the test controls.
fn clocked(home: Home, cfg: &ServerConfig) -> (Client<Home>, Rc<Cell<i64>>) {
    let now = Rc::new(Cell::new(1_000_000));
    let c = Rc::clone(&now);
    (client_for(home, cfg, "123456").with_clock(move || c.get()), now)
}

#[test]
fn login_succeeds_with_valid_credentials() {
    let cfg = demo_config();
    let mut client = client_for(Home::from_config(&cfg).unwrap(), &cfg, "123456");
    let ack = client.login().unwrap();
    assert_eq!(ack, Response::ok(["user=admin".to_string(), "ttl=300".to_string()]));
    assert!(client.state.session.is_some());
}

#[test]
fn wrong_password_is_refused_verbatim() {
    let cfg = demo_config();
    let mut client = client_for(Home::from_config(&cfg).unwrap(), &cfg, "nope");
    assert_eq!(client.login().unwrap().code(), "AUTH");
    assert!(client.state.session.is_none());
    assert_eq!(client.call("status.aspx", &[]).unwrap().code(), "AUTH");
}

#[test]
fn wrong_code_is_refused_verbatim() {
    let cfg = demo_config();
    let mut client = client_for(Home::from_config(&cfg).unwrap(), &cfg, "123456");
    client.state.code = "guess".into();
    assert_eq!(client.login().unwrap().code(), "BADCODE");
}

#[test]
fn expired_magic_is_renewed_and_the_call_retried() {
    let cfg = demo_config();
    let mut client = client_for(Home::from_config(&cfg).unwrap(), &cfg, "123456");
    client.login().unwrap();
    let first = client.state.session.clone().unwrap().magic;
    let start = client.transport_mut().now();
    client.transport_mut().tick(start.plus_secs(cfg.ttl + 1)).unwrap();
    let r = client.call("status.aspx", &[("oid", "7")]).unwrap();
    assert!(r.is_ok(), "{r:?}");
    assert_ne!(client.state.session.clone().unwrap().magic, first);
}

#[test]
fn added_scenario_is_listed_enabled() {
    let mut cfg = demo_config();
    cfg.scenarios.clear();
    let mut client = client_for(Home::from_config(&cfg).unwrap(), &cfg, "123456");
    let body = std::fs::read_to_string(demo_dir().join("scenarios/watering_plants.txt")).unwrap();
    let added = client
        .call("scenario.aspx", &[("action", "add"), ("body", &body)])
        .unwrap();
    assert!(added.is_ok(), "{added:?}");
    let list = client.call("scenario.aspx", &[("action", "list")]).unwrap();
    assert_eq!(list.lines(), ["SCN|Watering Plants|1|4".to_string()]);
    let table = robohome_cli::render::scenarios(list.lines());
    assert!(table.contains("Watering Plants  yes"), "{table}");
}

#[test]
fn stale_device_data_prompts_an_update() {
    let cfg = demo_config();
    let (mut client, now) = clocked(Home::from_config(&cfg).unwrap(), &cfg);
    assert!(client.device_warning().unwrap().contains("update-devices"));
    client.update_devices().unwrap();
    assert_eq!(client.device_warning(), None);
    now.set(now.get() + Staleness::default().device_max_age);
    assert_eq!(client.device_warning(), None);
    now.set(now.get() + 1);
    let w = client.device_warning().unwrap();
    assert!(w.contains("24 h old") && w.contains("update-devices"), "{w}");
}

#[test]
fn stale_info_uses_its_own_threshold() {
    let cfg = demo_config();
    let (mut client, now) = clocked(Home::from_config(&cfg).unwrap(), &cfg);
    client.update_devices().unwrap();
    client.update_info().unwrap();
    now.set(now.get() + 61);
    assert!(client.info_warning().unwrap().contains("update-info"));
    assert_eq!(client.device_warning(), None);
}

#[test]
fn update_categories_are_isolated() {
    let cfg = demo_config();
    let (mut client, now) = clocked(Home::from_config(&cfg).unwrap(), &cfg);
    client.update_devices().unwrap();
    let devices = client.state.devices.clone();
    now.set(now.get() + 10);
    client.update_info().unwrap();
    assert_eq!(client.state.devices, devices);
    let info = client.state.info.clone();
    now.set(now.get() + 10);
    client.update_devices().unwrap();
    assert_eq!(client.state.info, info);
    assert_ne!(client.state.devices, devices);
}

#[test]
fn sms_body_uses_cached_tables() {
    let cfg = demo_config();
    let mut client = client_for(Home::from_config(&cfg).unwrap(), &cfg, "123456");
    let text = "Scenario name: Night\nA. Lamp: off @ 23:00\nB. Home robot -> Door: close @ 23:05\n";
    assert!(client.sms_body(text).is_err(), "needs device data");
    client.update_devices().unwrap();
    let body = client.sms_body(text).unwrap();
    assert_eq!(body, "SC|Night|D8:off@2300;R4>D7:close@2305");
    let r = client.sms_send("+15550100", &body).unwrap();
    assert_eq!(r, Response::ok(["SCN|Night|1|2".to_string()]));
}

#[test]
fn state_round_trips_through_a_file() {
    let cfg = demo_config();
    let mut client = client_for(Home::from_config(&cfg).unwrap(), &cfg, "123456");
    client.update_devices().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/state.json");
    client.state.save(&path).unwrap();
    assert_eq!(ClientState::load(&path).unwrap(), Some(client.state.clone()));
    assert_eq!(ClientState::load(&dir.path().join("missing.json")).unwrap(), None);
}

#[test]
fn demo_map_matches_golden_rendering() {
    let cfg = demo_config();
    let mut client = client_for(Home::from_config(&cfg).unwrap(), &cfg, "123456");
    client.update_info().unwrap();
    let map = client.cached_map().unwrap().unwrap();
    let text = ascii::render(&map, Scale::default());
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/demo_map.txt");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden, &text).unwrap();
    }
    let expected = std::fs::read_to_string(&golden).unwrap();
    assert_eq!(text, expected);
    let door = map.icons.iter().find(|i| i.name == "Door").unwrap();
    assert!(text.contains("DO"));
    assert!(text.contains(&format!("* DO  oid {}", door.oid.0)));
    assert!(
        text.lines().any(|l| l.starts_with("  so  oid 0")),
        "furniture is not selectable"
    );
}
