//! The live home: runtime, sessions and the page handlers behind both
//! client transports.

use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::SeedableRng;
use thiserror::Error;

use crate::config::ServerConfig;
use crate::fleet::{load_fleet, ConfigError, Fleet};
use crate::model::{Credential, Database, DeviceId, ManageOp, ModelError, Registry, StoreError};
use crate::rules::parse_rule;
use crate::runtime::{Clock, ClockMode, Runtime, RuntimeError, TicketId};
use crate::scenario::{canonicalize, parse_scenario, validate, Scenario, Violation};
use crate::time::Instant;
use crate::wire::auth::SessionTable;
use crate::wire::mapcodec::encode_map;
use crate::wire::response::field;
use crate::wire::sms::{receive_sms, SmsCommand};
use crate::wire::tables::{device_line, robot_line, robot_status_line, status_line};
use crate::wire::{decode_request, icon_id, RequestEnvelope, Response, SmsMessage};

#[derive(Debug, Error)]
pub enum SetupError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Fleet(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {message}")]
    Bootstrap { path: String, message: String },
}

pub struct Home {
    pub rt: Runtime,
    sessions: SessionTable,
    secret: String,
    special_code: String,
    rng: StdRng,
    trace: Option<PathBuf>,
}

fn joined(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

fn model_err(e: ModelError) -> Response {
    let text = e.to_string();
    let (code, reason) = text.split_once(' ').unwrap_or((&text, ""));
    Response::err_with(code, reason)
}

fn runtime_err(e: RuntimeError) -> Response {
    match e {
        RuntimeError::ValidationFailed(v) => Response::err_with("VALIDATION", joined(&v)),
        RuntimeError::UnknownScenario(n) => Response::err_with("UNKNOWN_SCENARIO", n),
        RuntimeError::Disabled(n) => Response::err_with("DISABLED", n),
        RuntimeError::UnknownTicket(t) => Response::err_with("UNKNOWN_TICKET", t.to_string()),
        other => Response::err_with("INTERNAL", other.to_string()),
    }
}

impl Home {
    pub fn new(rt: Runtime, cfg: &ServerConfig) -> Self {
        let rng = match cfg.seed {
            Some(seed) => StdRng::seed_from_u64(seed),
            None => StdRng::from_os_rng(),
        };
        Home {
            rt,
            sessions: SessionTable::new(cfg.ttl),
            secret: cfg.secret.clone(),
            special_code: cfg.special_code.clone(),
            rng,
            trace: cfg.trace.clone(),
        }
    }

    /// Write the dispatch log to the configured trace file, if any.
    pub fn write_trace(&self) -> std::io::Result<()> {
        match &self.trace {
            Some(path) => self.rt.log().write_trace(path),
            None => Ok(()),
        }
    }

    /// Build the whole server from its configuration: open the store, load
    /// the fleet, register anything new, seed users, phones, scenarios and
    /// rules, and start the clock.
    pub fn from_config(cfg: &ServerConfig) -> Result<Self, SetupError> {
        cfg.check().map_err(SetupError::Config)?;
        let start = match (&cfg.start, cfg.clock) {
            (Some(s), _) => Instant::parse_iso8601(s).ok_or_else(|| SetupError::Config(format!("bad start {s:?}")))?,
            (None, ClockMode::Wall) => crate::runtime::wall_now(),
            (None, ClockMode::Virtual) => Instant::from_ymd_hm(2026, 1, 5, 0, 0).expect("valid date"),
        };
        let mut db = match &cfg.store {
            Some(path) => Database::open(path)?,
            None => Database::in_memory(Registry::new()),
        };
        let fleet = match &cfg.fleet {
            Some(path) => load_fleet(path, start)?,
            None => Fleet::new(start),
        };
        let mut seed_rng = match cfg.seed {
            Some(seed) => StdRng::seed_from_u64(seed ^ 0x5eed),
            None => StdRng::from_os_rng(),
        };
        db.mutate(|reg| -> Result<(), SetupError> {
            let (devices, robots) = fleet.records();
            for d in devices {
                if reg.device(d.oid).is_none() {
                    reg.register_device(d)?;
                }
            }
            for r in robots {
                if reg.robot(r.rid).is_none() {
                    reg.register_robot(r)?;
                }
            }
            for (user, pass) in &cfg.users {
                if reg.user(user).is_none() {
                    reg.put_user(user.clone(), Credential::seal(pass, &cfg.secret, &mut seed_rng));
                }
            }
            for phone in &cfg.allowed_phones {
                reg.allow_phone(phone.clone());
            }
            Ok(())
        })?;
        for path in &cfg.scenarios {
            let text = read(path)?;
            let s = parse_scenario(&text).map_err(|e| bootstrap(path, e.to_string()))?;
            let s = canonicalize(&s, db.registry());
            let v = validate(&s, db.registry());
            if !v.is_empty() {
                return Err(bootstrap(path, joined(&v)));
            }
            db.mutate(|reg| -> Result<(), StoreError> {
                reg.put_scenario(s);
                Ok(())
            })?;
        }
        for path in &cfg.rules {
            let text = read(path)?;
            let mut rule = parse_rule(&text, db.registry()).map_err(|e| bootstrap(path, e.to_string()))?;
            if rule.name.is_empty() {
                rule.name = path
                    .file_stem()
                    .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            }
            db.mutate(|reg| -> Result<(), StoreError> {
                reg.put_rule(rule);
                Ok(())
            })?;
        }
        let clock = match cfg.clock {
            ClockMode::Virtual => Clock::virtual_at(start),
            ClockMode::Wall => Clock::wall(),
        };
        let rt = Runtime::new(clock, cfg.poll, db, fleet);
        Ok(Home::new(rt, cfg))
    }

    pub fn now(&self) -> Instant {
        self.rt.now()
    }

    pub fn registry(&self) -> &Registry {
        self.rt.db().registry()
    }

    /// Handle one request line of the query-string channel.
    pub fn handle_line(&mut self, line: &str) -> Response {
        match decode_request(line) {
            Ok(env) => self.handle(&env),
            Err(e) => Response::err_with("MALFORMED_REQUEST", e.0),
        }
    }

    pub fn handle(&mut self, env: &RequestEnvelope) -> Response {
        self.rt.sync_wall();
        let now = self.rt.now();
        let route = env.route();
        let page = route.as_str();
        if !matches!(
            page,
            "auth.aspx"
                | "login.aspx"
                | "devices.aspx"
                | "status.aspx"
                | "map.aspx"
                | "scenario.aspx"
                | "rule.aspx"
                | "robots.aspx"
                | "camera.aspx"
        ) {
            return Response::err_with("BADPAGE", env.page.clone());
        }
        if page == "auth.aspx" {
            self.sessions.sweep(now);
            let code = env.get("code").unwrap_or("");
            return match self
                .sessions
                .issue(code, &self.special_code, &self.secret, now, &mut self.rng)
            {
                Ok(c) => Response::ok([c.nonce, c.ciphertext]),
                Err(e) => Response::err(e.code()),
            };
        }
        let (Some(user), Some(auth)) = (env.get("user"), env.get("auth")) else {
            return Response::err_with("AUTH", "user and auth are required");
        };
        let remaining = match self
            .sessions
            .authenticate(user, auth, now, self.rt.db().registry(), &self.secret)
        {
            Ok(session) => session.remaining(now),
            Err(e) => return Response::err(e.code()),
        };
        match page {
            "login.aspx" => Response::ok([format!("user={user}"), format!("ttl={remaining}")]),
            "devices.aspx" => self.devices_page(),
            "status.aspx" => self.status_page(env),
            "map.aspx" => self.map_page(),
            "scenario.aspx" => self.scenario_page(env),
            "rule.aspx" => self.rule_page(env),
            "robots.aspx" => Response::ok(self.registry().robots().map(robot_line)),
            _ => Response::err_with("NOT_IMPLEMENTED", "camera streaming is not available"),
        }
    }

    /// Handle a message from the SMS channel.
    pub fn handle_sms(&mut self, msg: &SmsMessage) -> Response {
        self.rt.sync_wall();
        match receive_sms(msg, self.registry()) {
            Ok(SmsCommand::Submit(s)) => self.store_scenario(s),
            Ok(SmsCommand::Activate(name)) => self.activate(&name, None),
            Err(e) => Response::err_with(e.code(), e.reason()),
        }
    }

    /// Advance the virtual clock.
    pub fn tick(&mut self, until: Instant) -> Result<usize, RuntimeError> {
        let n = self.rt.tick(until)?.len();
        if let Err(e) = self.rt.db_mut().flush() {
            log::warn!("store flush failed: {e}");
        }
        Ok(n)
    }

    fn devices_page(&self) -> Response {
        let reg = self.registry();
        Response::ok(reg.devices().map(device_line).chain(reg.robots().map(robot_line)))
    }

    fn status_lines(&self, only: Option<DeviceId>) -> Vec<String> {
        let reg = self.registry();
        let mut lines: Vec<String> = reg
            .devices()
            .filter(|d| only.is_none_or(|o| o == d.oid))
            .map(status_line)
            .collect();
        if only.is_none() {
            for r in reg.robots() {
                let (location, status) = match self.rt.fleet().robot(r.rid) {
                    Some(sim) => (sim.location.clone(), sim.status().to_string()),
                    None => (String::new(), "Unknown".to_string()),
                };
                lines.push(robot_status_line(r.rid, &location, &status));
            }
        }
        lines
    }

    fn status_page(&self, env: &RequestEnvelope) -> Response {
        match env.get("oid") {
            None => Response::ok(self.status_lines(None)),
            Some(raw) => match raw.parse::<u32>() {
                Ok(oid) if self.registry().device(DeviceId(oid)).is_some() => {
                    Response::ok(self.status_lines(Some(DeviceId(oid))))
                }
                _ => Response::err_with("UNKNOWN_OID", raw),
            },
        }
    }

    fn map_page(&self) -> Response {
        let mut map = self.rt.fleet().map().clone();
        for icon in &mut map.icons {
            if let Some(dev) = self.registry().device(icon.oid) {
                icon.icon_id = icon_id(dev);
            }
        }
        let mut lines = encode_map(&map);
        lines.extend(self.status_lines(None));
        Response::ok(lines)
    }

    fn scenario_page(&mut self, env: &RequestEnvelope) -> Response {
        let name = env.get("name").unwrap_or("");
        match env.get("action").unwrap_or("list") {
            "list" => Response::ok(self.registry().scenarios().map(scenario_line)),
            "show" => match self.registry().scenario(name) {
                Some(s) => Response::ok(s.to_string().lines().map(|l| format!("TXT|{}", field(l)))),
                None => Response::err_with("UNKNOWN_SCENARIO", name),
            },
            "add" => {
                let Some(body) = env.get("body") else {
                    return Response::err_with("PARSE_ERROR", "body is required");
                };
                match parse_scenario(body) {
                    Ok(s) => self.store_scenario(s),
                    Err(e) => Response::err_with("PARSE_ERROR", e.to_string()),
                }
            }
            op @ ("enable" | "disable" | "delete") => {
                let op = match op {
                    "enable" => ManageOp::Enable,
                    "disable" => ManageOp::Disable,
                    _ => ManageOp::Delete,
                };
                match self.rt.db_mut().mutate(|reg| reg.manage_scenario(name, op)) {
                    Ok(()) => Response::ok([]),
                    Err(e) => model_err(e),
                }
            }
            "activate" => self.activate(name, env.get("at")),
            "cancel" => {
                let Some(id) = env.get("ticket").and_then(|t| t.parse().ok()) else {
                    return Response::err_with("UNKNOWN_TICKET", env.get("ticket").unwrap_or(""));
                };
                match self.rt.cancel(TicketId(id)) {
                    Ok(n) => Response::ok([format!("CANCELLED|{id}|{n}")]),
                    Err(e) => runtime_err(e),
                }
            }
            "tickets" => Response::ok(self.rt.tickets().map(|t| {
                format!(
                    "TICKET|{}|{}|{}|{}|{}",
                    t.id,
                    field(&t.source),
                    t.pending(),
                    t.dispatched,
                    t.cancelled
                )
            })),
            other => Response::err_with("BADACTION", other),
        }
    }

    /// Canonicalize, validate and store a submitted scenario.
    fn store_scenario(&mut self, s: Scenario) -> Response {
        let s = canonicalize(&s, self.registry());
        let violations = validate(&s, self.registry());
        if !violations.is_empty() {
            return Response::err_with("VALIDATION", joined(&violations));
        }
        let line = scenario_line(&s);
        match self.rt.db_mut().mutate(|reg| -> Result<(), StoreError> {
            reg.put_scenario(s);
            Ok(())
        }) {
            Ok(()) => Response::ok([line]),
            Err(e) => Response::err_with("STORE", e.to_string()),
        }
    }

    fn activate(&mut self, name: &str, at: Option<&str>) -> Response {
        let now = self.rt.now();
        let at = match at {
            None | Some("") => now,
            Some(text) => match parse_at(text, now) {
                Some(t) => t,
                None => return Response::err_with("PARSE_ERROR", format!("bad activation time {text:?}")),
            },
        };
        match self.rt.activate_scenario(name, at) {
            Ok(id) => {
                let total = self.rt.ticket(id).map_or(0, |t| t.total);
                Response::ok([format!("TICKET|{id}|{total}")])
            }
            Err(e) => runtime_err(e),
        }
    }

    fn rule_page(&mut self, env: &RequestEnvelope) -> Response {
        let name = env.get("name").unwrap_or("");
        match env.get("action").unwrap_or("list") {
            "list" => Response::ok(self.registry().rules().map(|r| {
                format!(
                    "RULE|{}|{}|{}",
                    field(&r.name),
                    u8::from(r.enabled),
                    field(&r.to_string())
                )
            })),
            "add" => {
                let Some(body) = env.get("body") else {
                    return Response::err_with("PARSE_ERROR", "body is required");
                };
                let mut rule = match parse_rule(body, self.registry()) {
                    Ok(r) => r,
                    Err(e) => return Response::err_with("PARSE_ERROR", e.to_string()),
                };
                if !name.is_empty() {
                    rule.name = name.to_string();
                }
                if rule.name.is_empty() {
                    return Response::err_with("PARSE_ERROR", "rule needs a name");
                }
                let probe = Scenario::new(format!("rule {}", rule.name), rule.actions.clone());
                let violations = validate(&probe, self.registry());
                if !violations.is_empty() {
                    return Response::err_with("VALIDATION", joined(&violations));
                }
                let line = format!("RULE|{}|1|{}", field(&rule.name), field(&rule.to_string()));
                match self.rt.db_mut().mutate(|reg| -> Result<(), StoreError> {
                    reg.put_rule(rule);
                    Ok(())
                }) {
                    Ok(()) => Response::ok([line]),
                    Err(e) => Response::err_with("STORE", e.to_string()),
                }
            }
            "enable" | "disable" => {
                let on = env.get("action") == Some("enable");
                match self.rt.db_mut().mutate(|reg| reg.set_rule_enabled(name, on)) {
                    Ok(()) => Response::ok([]),
                    Err(e) => model_err(e),
                }
            }
            "delete" => match self.rt.db_mut().mutate(|reg| reg.remove_rule(name).map(|_| ())) {
                Ok(()) => Response::ok([]),
                Err(e) => model_err(e),
            },
            other => Response::err_with("BADACTION", other),
        }
    }
}

fn scenario_line(s: &Scenario) -> String {
    format!("SCN|{}|{}|{}", field(&s.name), u8::from(s.enabled), s.tasks.len())
}

/// `HH:MM` (next occurrence) or an ISO-8601 instant, never before `now`.
fn parse_at(text: &str, now: Instant) -> Option<Instant> {
    if let Some(t) = Instant::parse_iso8601(text) {
        return Some(t.max(now));
    }
    match crate::scenario::parse_time(text).ok()? {
        crate::scenario::TimeSpec::Now => Some(now),
        t => Some(t.resolve(now)),
    }
}

fn read(path: &Path) -> Result<String, SetupError> {
    std::fs::read_to_string(path).map_err(|e| bootstrap(path, e.to_string()))
}

fn bootstrap(path: &Path, message: String) -> SetupError {
    SetupError::Bootstrap {
        path: path.display().to_string(),
        message,
    }
}
