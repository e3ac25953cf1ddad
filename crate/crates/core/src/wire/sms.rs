//! The 160-character SMS channel.
//!
//! A scenario travels as `SC|<name>|<task>;<task>...` where a task is either
//! `<actor>:<verb>[(<param>)]@<time>` or a nested `<scenario>[@<time>]`.
//! Actors are numeric codes (`D5`, `R3`, `R3>D5`), times are `N` (now),
//! `HHMM` or `+<minutes>`. Names, verbs and parameters are percent-escaped
//! so the body stays inside the GSM 7-bit set and the reserved characters
//! `|;@()<>:%` keep their meaning. `ACT|<name>` activates a stored scenario.

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use thiserror::Error;

use crate::model::{Actor, DeviceId, Registry, RobotId};
use crate::scenario::{ActorRef, Scenario, Task, TimeSpec};

pub const SMS_MAX_CHARS: usize = 160;

const SMS_TEXT: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b' ')
    .remove(b'-')
    .remove(b'_')
    .remove(b'.')
    .remove(b',')
    .remove(b'!')
    .remove(b'\'')
    .remove(b'/')
    .remove(b'*')
    .remove(b'=')
    .remove(b'?')
    .remove(b'#')
    .remove(b'&')
    .remove(b'+')
    .remove(b'"')
    .remove(b'$');

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SmsError {
    #[error("SMS_TOO_LONG {0} characters")]
    TooLong(usize),
    #[error("SMS_SENDER_REJECTED {0}")]
    SenderRejected(String),
    #[error("PARSE_ERROR {0}")]
    Parse(String),
    #[error("UNKNOWN_ACTOR {0}")]
    Unresolved(String),
}

impl SmsError {
    pub fn code(&self) -> &'static str {
        match self {
            SmsError::TooLong(_) => "SMS_TOO_LONG",
            SmsError::SenderRejected(_) => "SMS_SENDER_REJECTED",
            SmsError::Parse(_) => "PARSE_ERROR",
            SmsError::Unresolved(_) => "UNKNOWN_ACTOR",
        }
    }

    /// The message without its leading code.
    pub fn reason(&self) -> String {
        match self {
            SmsError::TooLong(n) => format!("{n} characters"),
            SmsError::SenderRejected(s) | SmsError::Parse(s) | SmsError::Unresolved(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmsMessage {
    pub sender: String,
    pub body: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SmsCommand {
    Submit(Scenario),
    Activate(String),
}

/// Maps between entity names and numeric ids. Implemented by the registry
/// on the server and by the cached device tables on the client.
pub trait NameResolver {
    fn devices_named(&self, name: &str) -> Vec<DeviceId>;
    fn robots_named(&self, name: &str) -> Vec<RobotId>;
    fn device_name(&self, oid: DeviceId) -> Option<String>;
    fn robot_name(&self, rid: RobotId) -> Option<String>;
}

impl NameResolver for Registry {
    fn devices_named(&self, name: &str) -> Vec<DeviceId> {
        Registry::devices_named(self, name).iter().map(|d| d.oid).collect()
    }

    fn robots_named(&self, name: &str) -> Vec<RobotId> {
        Registry::robots_named(self, name).iter().map(|r| r.rid).collect()
    }

    fn device_name(&self, oid: DeviceId) -> Option<String> {
        self.device(oid).map(|d| d.name.clone())
    }

    fn robot_name(&self, rid: RobotId) -> Option<String> {
        self.robot(rid).map(|r| r.name.clone())
    }
}

fn esc(text: &str) -> String {
    utf8_percent_encode(text, SMS_TEXT).to_string()
}

fn unesc(text: &str) -> Result<String, SmsError> {
    let b = text.as_bytes();
    for (i, _) in text.match_indices('%') {
        if b.len() < i + 3 || !b[i + 1].is_ascii_hexdigit() || !b[i + 2].is_ascii_hexdigit() {
            return Err(SmsError::Parse(format!("bad escape in {text:?}")));
        }
    }
    percent_decode_str(text)
        .decode_utf8()
        .map(|s| s.into_owned())
        .map_err(|_| SmsError::Parse(format!("escape in {text:?} is not UTF-8")))
}

/// Whether `c` can be sent as one character of the GSM 7-bit alphabet.
/// `|` comes from the extension table; it is counted as one character.
fn gsm_ok(c: char) -> bool {
    c == '|' || (c.is_ascii() && !c.is_ascii_control() && !"[\\]^{}~`".contains(c))
}

fn unique<T: Copy>(found: Vec<T>, name: &str) -> Result<Option<T>, SmsError> {
    match found[..] {
        [] => Ok(None),
        [one] => Ok(Some(one)),
        _ => Err(SmsError::Unresolved(format!("{name} is ambiguous"))),
    }
}

fn actor_code(actor: &ActorRef, names: &dyn NameResolver) -> Result<String, SmsError> {
    match actor {
        ActorRef::Named { name } => {
            let dev = unique(names.devices_named(name), name)?;
            let rob = unique(names.robots_named(name), name)?;
            match (dev, rob) {
                (Some(d), None) => Ok(Actor::Device(d).code()),
                (None, Some(r)) => Ok(Actor::RobotSelf(r).code()),
                (None, None) => Err(SmsError::Unresolved(name.clone())),
                (Some(_), Some(_)) => Err(SmsError::Unresolved(format!("{name} is ambiguous"))),
            }
        }
        ActorRef::Delegated { robot, device } => {
            let r = unique(names.robots_named(robot), robot)?.ok_or_else(|| SmsError::Unresolved(robot.clone()))?;
            let d = unique(names.devices_named(device), device)?.ok_or_else(|| SmsError::Unresolved(device.clone()))?;
            Ok(Actor::RobotOnDevice(r, d).code())
        }
    }
}

fn time_code(t: &TimeSpec) -> String {
    match t {
        TimeSpec::Now => "N".into(),
        TimeSpec::At { hour, minute } => format!("{hour:02}{minute:02}"),
        TimeSpec::After { minutes } => format!("+{minutes}"),
    }
}

/// Encode a scenario whose actors all resolve to numeric ids.
pub fn encode_sms_scenario(s: &Scenario, names: &dyn NameResolver) -> Result<String, SmsError> {
    let mut tasks = Vec::with_capacity(s.tasks.len());
    for task in &s.tasks {
        tasks.push(match task {
            Task::Action {
                actor,
                verb,
                param,
                time,
            } => {
                let mut t = format!("{}:{}", actor_code(actor, names)?, esc(verb));
                if let Some(p) = param {
                    t.push_str(&format!("({})", esc(p)));
                }
                t.push('@');
                t.push_str(&time_code(time));
                t
            }
            Task::ScenarioRef { name, override_time } => match override_time {
                Some(time) => format!("{}@{}", esc(name), time_code(time)),
                None => esc(name),
            },
        });
    }
    let body = format!("SC|{}|{}", esc(&s.name), tasks.join(";"));
    let len = body.chars().count();
    if len > SMS_MAX_CHARS {
        return Err(SmsError::TooLong(len));
    }
    Ok(body)
}

fn parse_time(code: &str) -> Result<TimeSpec, SmsError> {
    let bad = || SmsError::Parse(format!("bad time {code:?}"));
    let t = if code == "N" {
        TimeSpec::Now
    } else if let Some(m) = code.strip_prefix('+') {
        TimeSpec::After {
            minutes: m.parse().map_err(|_| bad())?,
        }
    } else if code.len() == 4 && code.bytes().all(|b| b.is_ascii_digit()) {
        TimeSpec::At {
            hour: code[..2].parse().map_err(|_| bad())?,
            minute: code[2..].parse().map_err(|_| bad())?,
        }
    } else {
        return Err(bad());
    };
    if t.is_valid() {
        Ok(t)
    } else {
        Err(bad())
    }
}

fn parse_actor(code: &str, names: &dyn NameResolver) -> Result<ActorRef, SmsError> {
    let actor = Actor::from_code(code).ok_or_else(|| SmsError::Parse(format!("bad actor code {code:?}")))?;
    let dev = |oid| {
        names
            .device_name(oid)
            .ok_or_else(|| SmsError::Unresolved(Actor::Device(oid).code()))
    };
    let rob = |rid| {
        names
            .robot_name(rid)
            .ok_or_else(|| SmsError::Unresolved(Actor::RobotSelf(rid).code()))
    };
    Ok(match actor {
        Actor::Device(oid) => ActorRef::named(dev(oid)?),
        Actor::RobotSelf(rid) => ActorRef::named(rob(rid)?),
        Actor::RobotOnDevice(rid, oid) => ActorRef::delegated(rob(rid)?, dev(oid)?),
    })
}

fn parse_task(text: &str, names: &dyn NameResolver) -> Result<Task, SmsError> {
    if let Some((actor, rest)) = text.split_once(':') {
        let (call, time) = rest
            .split_once('@')
            .ok_or_else(|| SmsError::Parse(format!("task {text:?} has no time")))?;
        let (verb, param) = match call.split_once('(') {
            Some((v, p)) => {
                let p = p
                    .strip_suffix(')')
                    .ok_or_else(|| SmsError::Parse(format!("unclosed parameter in {text:?}")))?;
                (v, Some(unesc(p)?))
            }
            None => (call, None),
        };
        if verb.is_empty() {
            return Err(SmsError::Parse(format!("task {text:?} has no verb")));
        }
        return Ok(Task::Action {
            actor: parse_actor(actor, names)?,
            verb: unesc(verb)?,
            param,
            time: parse_time(time)?,
        });
    }
    let (name, time) = match text.split_once('@') {
        Some((n, t)) => (n, Some(parse_time(t)?)),
        None => (text, None),
    };
    if name.is_empty() {
        return Err(SmsError::Parse("empty scenario reference".into()));
    }
    Ok(Task::nested(unesc(name)?, time))
}

fn check_body(body: &str) -> Result<(), SmsError> {
    let len = body.chars().count();
    if len > SMS_MAX_CHARS {
        return Err(SmsError::TooLong(len));
    }
    if let Some(c) = body.chars().find(|c| !gsm_ok(*c)) {
        return Err(SmsError::Parse(format!("character {c:?} outside the GSM 7-bit set")));
    }
    Ok(())
}

pub fn decode_sms(body: &str, names: &dyn NameResolver) -> Result<Scenario, SmsError> {
    match parse_sms_command(body, names)? {
        SmsCommand::Submit(s) => Ok(s),
        SmsCommand::Activate(_) => Err(SmsError::Parse("expected SC| scenario".into())),
    }
}

pub fn parse_sms_command(body: &str, names: &dyn NameResolver) -> Result<SmsCommand, SmsError> {
    let body = body.trim_end_matches(['\r', '\n']);
    check_body(body)?;
    if let Some(name) = body.strip_prefix("ACT|") {
        return Ok(SmsCommand::Activate(unesc(name)?));
    }
    let rest = body
        .strip_prefix("SC|")
        .ok_or_else(|| SmsError::Parse("expected SC| or ACT|".into()))?;
    let (name, tasks) = rest
        .split_once('|')
        .ok_or_else(|| SmsError::Parse("expected SC|<name>|<tasks>".into()))?;
    let name = unesc(name)?;
    if name.trim().is_empty() {
        return Err(SmsError::Parse("empty scenario name".into()));
    }
    if tasks.is_empty() {
        return Err(SmsError::Parse("scenario has no tasks".into()));
    }
    let tasks = tasks
        .split(';')
        .map(|t| parse_task(t, names))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SmsCommand::Submit(Scenario::new(name, tasks)))
}

/// Check the sender against the allowlist, then decode.
pub fn receive_sms(msg: &SmsMessage, reg: &Registry) -> Result<SmsCommand, SmsError> {
    if !reg.phone_allowed(&msg.sender) {
        return Err(SmsError::SenderRejected(msg.sender.clone()));
    }
    parse_sms_command(&msg.body, reg)
}
