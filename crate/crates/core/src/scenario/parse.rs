//! Line-oriented parser for the scenario text format:
//!
//! ```text
//! Scenario name: Clean Home
//! A. Cleaning robot: Clean (Bathtub) @ Now
//! B. [Gather Dishes] @ 10:00 AM
//! C. Home robot→Washing machine: on @ 10:05 AM
//! ```

use std::fmt;

use super::ast::{ActorRef, Scenario, Task, TimeSpec};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    /// 1-based line number; 0 when the input has no lines at all.
    pub line: usize,
    pub expected: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PARSE_ERROR line {}: expected {}", self.line, self.expected)
    }
}

impl std::error::Error for ParseError {}

pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (header_line, header) = lines.next().ok_or(ParseError {
        line: 0,
        expected: "'Scenario name: <name>' header".into(),
    })?;
    let name = strip_prefix_ci(header, "scenario name:")
        .map(str::trim)
        .filter(|n| !n.is_empty())
        .ok_or_else(|| ParseError {
            line: header_line,
            expected: "'Scenario name: <name>' header".into(),
        })?;

    let mut tasks = Vec::new();
    let mut last_line = header_line;
    for (line, text) in lines {
        last_line = line;
        let task = parse_task(text).map_err(|expected| ParseError {
            line,
            expected: expected.to_string(),
        })?;
        tasks.push(task);
    }
    if tasks.is_empty() {
        return Err(ParseError {
            line: last_line,
            expected: "at least one task".into(),
        });
    }
    Ok(Scenario::new(name, tasks))
}

/// Parse one task in any of the three task forms. On failure returns a hint
/// naming what was expected.
pub fn parse_task(line: &str) -> Result<Task, &'static str> {
    let line = strip_ordinal(strip_bullet(line.trim()));
    if let Some(rest) = line.strip_prefix('[') {
        let (name, rest) = rest.split_once(']').ok_or("']' closing the scenario name")?;
        let name = name.trim();
        if name.is_empty() {
            return Err("a scenario name inside brackets");
        }
        let rest = rest.trim();
        let override_time = if rest.is_empty() {
            None
        } else {
            let time = rest.strip_prefix('@').ok_or("'@ <time>' or end of line")?;
            Some(parse_time(time)?)
        };
        return Ok(Task::nested(name, override_time));
    }

    let (actor_text, rest) = line.split_once(':').ok_or("'<actor>: <verb>'")?;
    let actor = parse_actor(actor_text)?;
    let rest = rest.trim();

    let (head, time_text) = match rest.find('(') {
        Some(open) => {
            let close = rest[open..].find(')').ok_or("')' closing the parameter")? + open;
            let after = rest[close + 1..].trim();
            let time = after.strip_prefix('@').ok_or("'@ <time>'")?;
            (&rest[..=close], time)
        }
        None => {
            let at = rest.find('@').ok_or("'@ <time>'")?;
            (&rest[..at], &rest[at + 1..])
        }
    };
    let (verb, param) = match head.find('(') {
        Some(open) => {
            let param = head[open + 1..head.len() - 1].trim();
            if param.is_empty() {
                return Err("a parameter inside parentheses");
            }
            (head[..open].trim(), Some(param))
        }
        None => (head.trim(), None),
    };
    if verb.is_empty() || verb.contains(['@', '[', ']', ')']) {
        return Err("a verb after ':'");
    }
    let time = parse_time(time_text)?;
    Ok(Task::action(actor, verb, param, time))
}

fn parse_actor(text: &str) -> Result<ActorRef, &'static str> {
    let split = text.split_once('→').or_else(|| text.split_once("->"));
    let valid = |s: &str| !s.is_empty() && !s.contains(['@', '(', ')', '[', ']']);
    match split {
        Some((robot, device)) => {
            let (robot, device) = (robot.trim(), device.trim());
            if !valid(robot) || !valid(device) {
                return Err("'<robot>→<device>' actor");
            }
            Ok(ActorRef::delegated(robot, device))
        }
        None => {
            let name = text.trim();
            if !valid(name) {
                return Err("an actor name before ':'");
            }
            Ok(ActorRef::named(name))
        }
    }
}

/// `Now`, `In <n> Minutes`, `<h>:<mm> AM|PM` or 24-hour `<H>:<MM>`.
pub fn parse_time(text: &str) -> Result<TimeSpec, &'static str> {
    const HINT: &str = "a time: 'Now', 'In <n> Minutes', '<h>:<mm> AM|PM' or '<H>:<MM>'";
    let text = text.trim();
    if text.eq_ignore_ascii_case("now") {
        return Ok(TimeSpec::Now);
    }
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.len() == 3 && words[0].eq_ignore_ascii_case("in") {
        let unit = words[2].to_ascii_lowercase();
        if unit != "minute" && unit != "minutes" {
            return Err(HINT);
        }
        let minutes: u32 = words[1].parse().map_err(|_| HINT)?;
        if minutes == 0 {
            return Err("a positive number of minutes");
        }
        return Ok(TimeSpec::After { minutes });
    }
    let (clock, meridiem) = match words.as_slice() {
        [clock] => (*clock, None),
        [clock, m] => (*clock, Some(m.to_ascii_uppercase())),
        _ => return Err(HINT),
    };
    let (h, m) = clock.split_once(':').ok_or(HINT)?;
    if h.is_empty() || h.len() > 2 || m.len() != 2 {
        return Err(HINT);
    }
    let hour: u8 = h.parse().map_err(|_| HINT)?;
    let minute: u8 = m.parse().map_err(|_| HINT)?;
    if minute > 59 {
        return Err(HINT);
    }
    let hour = match meridiem.as_deref() {
        None if hour < 24 => hour,
        Some("AM") if (1..=12).contains(&hour) => hour % 12,
        Some("PM") if (1..=12).contains(&hour) => hour % 12 + 12,
        _ => return Err(HINT),
    };
    Ok(TimeSpec::At { hour, minute })
}

fn strip_bullet(line: &str) -> &str {
    for bullet in ["- ", "* ", "• "] {
        if let Some(rest) = line.strip_prefix(bullet) {
            return rest.trim_start();
        }
    }
    line
}

/// Drop an ordinal such as `A.` or `12.` followed by whitespace.
fn strip_ordinal(line: &str) -> &str {
    let token_len = line.bytes().take_while(u8::is_ascii_alphanumeric).count();
    if (1..=3).contains(&token_len) {
        let rest = &line[token_len..];
        if let Some(after) = rest.strip_prefix('.') {
            if after.starts_with(char::is_whitespace) {
                return after.trim_start();
            }
        }
    }
    line
}

pub(crate) fn strip_prefix_ci<'a>(text: &'a str, prefix: &str) -> Option<&'a str> {
    let head = text.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix).then(|| &text[prefix.len()..])
}

#[cfg(test)]
mod tests {
    use super::*;

    const WATERING: &str = "Scenario name: Watering Plants
A. Sprinkler 1: on @ 5:00 AM
B. Sprinkler 2: on @ 5:30 AM
C. Sprinkler 1: off @ 7:00 AM
D. Sprinkler 2: off @ 9:00 AM
";

    #[test]
    fn watering_plants_listing() {
        let s = parse_scenario(WATERING).unwrap();
        assert_eq!(s.name, "Watering Plants");
        let expected = vec![
            Task::action(ActorRef::named("Sprinkler 1"), "on", None, TimeSpec::at(5, 0)),
            Task::action(ActorRef::named("Sprinkler 2"), "on", None, TimeSpec::at(5, 30)),
            Task::action(ActorRef::named("Sprinkler 1"), "off", None, TimeSpec::at(7, 0)),
            Task::action(ActorRef::named("Sprinkler 2"), "off", None, TimeSpec::at(9, 0)),
        ];
        assert_eq!(s.tasks, expected);
        assert!(s.enabled);
    }

    #[test]
    fn parameterized_robot_action() {
        assert_eq!(
            parse_task("Cleaning robot: Clean (Bathtub) @ Now"),
            Ok(Task::action(
                ActorRef::named("Cleaning robot"),
                "Clean",
                Some("Bathtub"),
                TimeSpec::Now
            ))
        );
    }

    #[test]
    fn nested_with_override() {
        assert_eq!(
            parse_task("[Gather Dishes] @ 10:00 AM"),
            Ok(Task::nested("Gather Dishes", Some(TimeSpec::at(10, 0))))
        );
        assert_eq!(
            parse_task("B. [Gather Dishes]"),
            Ok(Task::nested("Gather Dishes", None))
        );
    }

    #[test]
    fn both_arrow_spellings() {
        let expected = Task::action(
            ActorRef::delegated("Home robot", "Washing machine"),
            "on",
            None,
            TimeSpec::at(10, 5),
        );
        assert_eq!(
            parse_task("C. Home robot→Washing machine: on @ 10:05 AM"),
            Ok(expected.clone())
        );
        assert_eq!(parse_task("Home robot -> Washing machine: on @ 10:05"), Ok(expected));
    }

    #[test]
    fn bulleted_listing_from_documents() {
        assert_eq!(
            parse_task("- E. Mover robot: GoTo (DefaultPosition) @ In 7 Minutes"),
            Ok(Task::action(
                ActorRef::named("Mover robot"),
                "GoTo",
                Some("DefaultPosition"),
                TimeSpec::after(7)
            ))
        );
    }

    #[test]
    fn times() {
        assert_eq!(parse_time("12:00 AM"), Ok(TimeSpec::at(0, 0)));
        assert_eq!(parse_time("12:30 pm"), Ok(TimeSpec::at(12, 30)));
        assert_eq!(parse_time("1:05 PM"), Ok(TimeSpec::at(13, 5)));
        assert_eq!(parse_time("23:59"), Ok(TimeSpec::at(23, 59)));
        assert_eq!(parse_time("In 1 Minute"), Ok(TimeSpec::after(1)));
        assert!(parse_time("In 0 Minutes").is_err());
        assert!(parse_time("24:00").is_err());
        assert!(parse_time("13:00 PM").is_err());
        assert!(parse_time("5:7 AM").is_err());
        assert!(parse_time("soon").is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_scenario("Scenario name: X\nA. Lamp: on @ 10:00\nB. Lamp: off\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.expected.contains('@'));
        assert_eq!(parse_scenario("").unwrap_err().line, 0);
        assert_eq!(parse_scenario("Lamp: on @ Now").unwrap_err().line, 1);
        assert_eq!(
            parse_scenario("Scenario name: Empty\n\n").unwrap_err().expected,
            "at least one task"
        );
    }

    #[test]
    fn missing_pieces() {
        assert!(parse_task("Lamp on @ Now").is_err());
        assert!(parse_task("Lamp: @ Now").is_err());
        assert!(parse_task("Robot: Clean (Bathtub @ Now").is_err());
        assert!(parse_task("Robot: Clean () @ Now").is_err());
        assert!(parse_task("[] @ Now").is_err());
        assert!(parse_task("[Dishes] 10:00").is_err());
    }
}
