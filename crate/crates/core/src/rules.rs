//! Condition/action rules, evaluated against sensor snapshots and fired on
//! the false→true edge of their condition.
//!
//! Text form, with an optional name header:
//!
//! ```text
//! Rule name: Overheat
//! when temp > 30 and door = Closed then AC: on @ Now; [Evacuate] @ Now
//! ```

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Category, DeviceId, DeviceRecord, Registry, StatusValue};
use crate::scenario::{parse_task, strip_prefix_ci, Task};
use crate::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
    Ne,
}

impl Comparator {
    fn from_token(tok: &str) -> Option<Self> {
        Some(match tok {
            "<" => Comparator::Lt,
            "<=" | "≤" => Comparator::Le,
            "=" | "==" => Comparator::Eq,
            ">=" | "≥" => Comparator::Ge,
            ">" => Comparator::Gt,
            "!=" | "≠" | "<>" => Comparator::Ne,
            _ => return None,
        })
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Eq => "=",
            Comparator::Ge => ">=",
            Comparator::Gt => ">",
            Comparator::Ne => "!=",
        }
    }

    fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            Comparator::Lt => ord == Less,
            Comparator::Le => ord != Greater,
            Comparator::Eq => ord == Equal,
            Comparator::Ge => ord != Less,
            Comparator::Gt => ord == Greater,
            Comparator::Ne => ord != Equal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constant {
    Int(i64),
    Label(String),
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Int(v) => write!(f, "{v}"),
            Constant::Label(l) => f.write_str(l),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Condition {
    Atom {
        sensor: DeviceId,
        /// Sensor name as written, for display.
        name: String,
        cmp: Comparator,
        value: Constant,
    },
    And {
        left: Box<Condition>,
        right: Box<Condition>,
    },
    Or {
        left: Box<Condition>,
        right: Box<Condition>,
    },
    Not {
        inner: Box<Condition>,
    },
}

impl Condition {
    pub fn sensors(&self) -> Vec<DeviceId> {
        let mut out = Vec::new();
        self.collect_sensors(&mut out);
        out
    }

    fn collect_sensors(&self, out: &mut Vec<DeviceId>) {
        match self {
            Condition::Atom { sensor, .. } => out.push(*sensor),
            Condition::And { left, right } | Condition::Or { left, right } => {
                left.collect_sensors(out);
                right.collect_sensors(out);
            }
            Condition::Not { inner } => inner.collect_sensors(out),
        }
    }

    /// Truth value over `devices`; `Err` names the first sensor that is missing.
    pub fn eval(&self, devices: &BTreeMap<DeviceId, &DeviceRecord>) -> Result<bool, DeviceId> {
        Ok(match self {
            Condition::Atom { sensor, cmp, value, .. } => {
                let dev = devices.get(sensor).ok_or(*sensor)?;
                match (&dev.status, value) {
                    (StatusValue::Level { value: v }, Constant::Int(c)) => cmp.holds(v.cmp(c)),
                    (status, Constant::Label(l)) => {
                        let equal = status.label().eq_ignore_ascii_case(l);
                        match cmp {
                            Comparator::Eq => equal,
                            Comparator::Ne => !equal,
                            _ => false,
                        }
                    }
                    // Busy or a category changed after parsing.
                    _ => false,
                }
            }
            Condition::And { left, right } => left.eval(devices)? && right.eval(devices)?,
            Condition::Or { left, right } => left.eval(devices)? || right.eval(devices)?,
            Condition::Not { inner } => !inner.eval(devices)?,
        })
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Atom { name, cmp, value, .. } => write!(f, "{name} {} {value}", cmp.symbol()),
            Condition::And { left, right } => write!(f, "({left} and {right})"),
            Condition::Or { left, right } => write!(f, "({left} or {right})"),
            Condition::Not { inner } => write!(f, "not {inner}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleDef {
    pub name: String,
    pub condition: Condition,
    pub actions: Vec<Task>,
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default)]
    pub last_state: bool,
}

fn yes() -> bool {
    true
}

impl fmt::Display for RuleDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "when {} then ", self.condition)?;
        for (i, t) in self.actions.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleParseError {
    /// Byte offset into the rule text.
    pub position: usize,
    pub message: String,
}

impl fmt::Display for RuleParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PARSE_ERROR at {}: {}", self.position, self.message)
    }
}

impl std::error::Error for RuleParseError {}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Open,
    Close,
    Cmp(Comparator),
    Word(String),
}

fn tokenize(text: &str, base: usize) -> Result<Vec<(usize, Tok)>, RuleParseError> {
    let is_cmp = |c: char| matches!(c, '<' | '>' | '=' | '!' | '≤' | '≥' | '≠');
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '(' {
            out.push((base + i, Tok::Open));
            chars.next();
        } else if c == ')' {
            out.push((base + i, Tok::Close));
            chars.next();
        } else if is_cmp(c) {
            let mut end = i;
            while let Some(&(j, d)) = chars.peek() {
                if !is_cmp(d) {
                    break;
                }
                end = j + d.len_utf8();
                chars.next();
            }
            let sym = &text[i..end];
            let cmp = Comparator::from_token(sym).ok_or_else(|| RuleParseError {
                position: base + i,
                message: format!("unknown comparator {sym:?}"),
            })?;
            out.push((base + i, Tok::Cmp(cmp)));
        } else {
            let mut end = i;
            while let Some(&(j, d)) = chars.peek() {
                if d.is_whitespace() || d == '(' || d == ')' || is_cmp(d) {
                    break;
                }
                end = j + d.len_utf8();
                chars.next();
            }
            out.push((base + i, Tok::Word(text[i..end].to_string())));
        }
    }
    Ok(out)
}

struct CondParser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    reg: &'a Registry,
}

impl CondParser<'_> {
    fn err<T>(&self, at: usize, message: impl Into<String>) -> Result<T, RuleParseError> {
        Err(RuleParseError {
            position: at,
            message: message.into(),
        })
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn keyword(&self, kw: &str) -> bool {
        matches!(self.toks.get(self.pos), Some((_, Tok::Word(w))) if w.eq_ignore_ascii_case(kw))
    }

    fn or(&mut self) -> Result<Condition, RuleParseError> {
        let mut left = self.and()?;
        while self.keyword("or") {
            self.pos += 1;
            let right = self.and()?;
            left = Condition::Or {
                left: Box::new(left),
                right: Box::new(right),
            };
        }
        Ok(left)
    }

    fn and(&mut self) -> Result<Condition, RuleParseError> {
        let mut left = self.not()?;
        while self.keyword("and") {
            self.pos += 1;
            let right = self.not()?;
            left = Condition::And {
                left: Box::new(left),
                right: Box::new(right),
            };
        }
        Ok(left)
    }

    fn not(&mut self) -> Result<Condition, RuleParseError> {
        if self.keyword("not") {
            self.pos += 1;
            let inner = self.not()?;
            return Ok(Condition::Not { inner: Box::new(inner) });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Condition, RuleParseError> {
        if matches!(self.toks.get(self.pos), Some((_, Tok::Open))) {
            self.pos += 1;
            let inner = self.or()?;
            if !matches!(self.toks.get(self.pos), Some((_, Tok::Close))) {
                return self.err(self.here(), "expected ')'");
            }
            self.pos += 1;
            return Ok(inner);
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Condition, RuleParseError> {
        let start = self.here();
        let mut words = Vec::new();
        while let Some((_, Tok::Word(w))) = self.toks.get(self.pos) {
            words.push(w.clone());
            self.pos += 1;
        }
        if words.is_empty() {
            return self.err(start, "expected a sensor name");
        }
        let cmp_at = self.here();
        let Some((_, Tok::Cmp(cmp))) = self.toks.get(self.pos).cloned() else {
            return self.err(cmp_at, "expected a comparator");
        };
        self.pos += 1;
        let value_at = self.here();
        let Some((_, Tok::Word(raw))) = self.toks.get(self.pos).cloned() else {
            return self.err(value_at, "expected a constant");
        };
        self.pos += 1;

        let name = words.join(" ");
        let device = match self.reg.devices_named(&name).as_slice() {
            [d] => *d,
            [] => return self.err(start, format!("unknown sensor {name:?}")),
            _ => return self.err(start, format!("ambiguous sensor {name:?}")),
        };
        let value = typed_constant(device, cmp, &raw).map_err(|m| RuleParseError {
            position: cmp_at,
            message: m,
        })?;
        if !device.kind.senses() {
            return self.err(start, format!("{name} is not a sensor"));
        }
        Ok(Condition::Atom {
            sensor: device.oid,
            name,
            cmp,
            value,
        })
    }
}

/// Check the comparator and constant against the device's status type.
fn typed_constant(device: &DeviceRecord, cmp: Comparator, raw: &str) -> Result<Constant, String> {
    let labels: &[(&str, &str)] = match device.category {
        Category::Leveled => {
            return raw
                .parse::<i64>()
                .map(Constant::Int)
                .map_err(|_| format!("{} compares against integers, not {raw:?}", device.name));
        }
        Category::OnOff => &[("on", "On"), ("off", "Off")],
        Category::AppearingDisappearing => &[("present", "Present"), ("absent", "Absent")],
        Category::OpenedClosed => &[("opened", "Opened"), ("open", "Opened"), ("closed", "Closed")],
        Category::Custom => &[],
    };
    if !matches!(cmp, Comparator::Eq | Comparator::Ne) {
        return Err(format!("comparator {} not allowed on {}", cmp.symbol(), device.name));
    }
    if device.category == Category::Custom {
        return Ok(Constant::Label(raw.to_string()));
    }
    labels
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case(raw))
        .map(|(_, canonical)| Constant::Label(canonical.to_string()))
        .ok_or_else(|| format!("{raw:?} is not a status of {}", device.name))
}

fn find_keyword(text: &str, kw: &str) -> Option<usize> {
    let lower = text.to_ascii_lowercase();
    let mut from = 0;
    while let Some(off) = lower[from..].find(kw) {
        let at = from + off;
        let before = lower[..at].chars().next_back();
        let after = lower[at + kw.len()..].chars().next();
        let bounded = |c: Option<char>| c.is_none_or(|c| c.is_whitespace() || c == '(' || c == ')');
        if bounded(before) && bounded(after) {
            return Some(at);
        }
        from = at + kw.len();
    }
    None
}

/// Parse a rule. Sensors are resolved against `reg` so comparators can be
/// type-checked. The name comes from a `Rule name:` header, else is empty.
pub fn parse_rule(text: &str, reg: &Registry) -> Result<RuleDef, RuleParseError> {
    let mut name = String::new();
    let mut body = String::new();
    for line in text.lines() {
        let t = line.trim();
        if let Some(n) = strip_prefix_ci(t, "rule name:") {
            name = n.trim().to_string();
        } else if !t.is_empty() {
            if !body.is_empty() {
                body.push(' ');
            }
            body.push_str(t);
        }
    }
    let err = |position, message: &str| RuleParseError {
        position,
        message: message.to_string(),
    };
    let rest = strip_prefix_ci(&body, "when").ok_or_else(|| err(0, "expected 'when'"))?;
    if !rest.starts_with(char::is_whitespace) {
        return Err(err(0, "expected 'when'"));
    }
    let cond_start = 4;
    let then_at = find_keyword(rest, "then").ok_or_else(|| err(body.len(), "expected 'then'"))?;
    let cond_text = &rest[..then_at];
    let actions_text = &rest[then_at + 4..];

    let toks = tokenize(cond_text, cond_start)?;
    let mut parser = CondParser {
        toks,
        pos: 0,
        end: cond_start + then_at,
        reg,
    };
    let condition = parser.or()?;
    if parser.pos != parser.toks.len() {
        return parser.err(parser.here(), "unexpected token in condition");
    }

    let mut actions = Vec::new();
    let mut offset = cond_start + then_at + 4;
    for part in actions_text.split(';') {
        if !part.trim().is_empty() {
            let task = parse_task(part).map_err(|hint| RuleParseError {
                position: offset,
                message: format!("expected {hint}"),
            })?;
            actions.push(task);
        }
        offset += part.len() + 1;
    }
    if actions.is_empty() {
        return Err(err(offset.min(body.len()), "expected at least one action"));
    }
    Ok(RuleDef {
        name,
        condition,
        actions,
        enabled: true,
        last_state: false,
    })
}

/// Actions of a rule whose condition just became true.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiredRule {
    pub rule: String,
    pub at: Instant,
    pub tasks: Vec<Task>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RuleDiagnostic {
    UnknownSensor { rule: String, sensor: DeviceId },
}

impl fmt::Display for RuleDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleDiagnostic::UnknownSensor { rule, sensor } => {
                write!(f, "UNKNOWN_SENSOR {sensor} in rule {rule}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Evaluation {
    pub fired: Vec<FiredRule>,
    pub diagnostics: Vec<RuleDiagnostic>,
}

/// Evaluate `rules` against `snapshot`, firing on false→true transitions.
/// Disabled rules neither fire nor update their last state.
pub fn evaluate<'a>(
    rules: impl IntoIterator<Item = &'a mut RuleDef>,
    snapshot: &[DeviceRecord],
    at: Instant,
) -> Evaluation {
    let devices: BTreeMap<DeviceId, &DeviceRecord> = snapshot.iter().map(|d| (d.oid, d)).collect();
    let mut out = Evaluation::default();
    for rule in rules {
        if !rule.enabled {
            continue;
        }
        let now = match rule.condition.eval(&devices) {
            Ok(v) => v,
            Err(sensor) => {
                out.diagnostics.push(RuleDiagnostic::UnknownSensor {
                    rule: rule.name.clone(),
                    sensor,
                });
                false
            }
        };
        if now && !rule.last_state {
            out.fired.push(FiredRule {
                rule: rule.name.clone(),
                at,
                tasks: rule.actions.clone(),
            });
        }
        rule.last_state = now;
    }
    out
}
