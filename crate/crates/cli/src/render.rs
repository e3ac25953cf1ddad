//! Plain-text tables for page replies. Output depends only on the reply
//! lines and the cached tables, so it is stable for golden files.

use std::fmt::Write;

use robohome_core::wire::response::unfield;
use robohome_core::wire::tables::{
    parse_device_line, parse_robot_line, parse_robot_status_line, parse_status_line, CapabilityTables,
};

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let mut text = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                text.push_str("  ");
            }
            let _ = write!(text, "{cell:<w$}");
        }
        out.push_str(text.trim_end());
        out.push('\n');
    };
    line(header.to_vec());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
    out
}

fn fields(line: &str, tag: &str) -> Option<Vec<String>> {
    Some(line.strip_prefix(tag)?.split('|').map(unfield).collect())
}

pub fn devices(lines: &[String]) -> String {
    let rows: Vec<Vec<String>> = lines
        .iter()
        .filter_map(|l| parse_device_line(l))
        .map(|d| {
            let verbs: Vec<String> = d.verbs.iter().map(|(v, p)| format!("{v}:{}", p.token())).collect();
            vec![
                d.oid.to_string(),
                d.name,
                d.kind.as_str().into(),
                d.category.as_str().into(),
                d.tier.as_str().into(),
                verbs.join(","),
            ]
        })
        .collect();
    table(&["OID", "NAME", "KIND", "CATEGORY", "TIER", "VERBS"], &rows)
}

pub fn robots(lines: &[String]) -> String {
    let mut rows = Vec::new();
    for r in lines.iter().filter_map(|l| parse_robot_line(l)) {
        let actions: Vec<String> = r
            .self_actions
            .iter()
            .map(|(v, p)| {
                let off = r.action_enabled.get(v) == Some(&false);
                format!("{v}:{}{}", p.token(), if off { " (off)" } else { "" })
            })
            .collect();
        let delegations: Vec<String> = r
            .delegations
            .iter()
            .map(|d| format!("{}:{}", d.device_oid, d.verb))
            .collect();
        rows.push(vec![
            r.rid.to_string(),
            r.name,
            if r.enabled { "yes" } else { "no" }.into(),
            actions.join(","),
            delegations.join(","),
        ]);
    }
    table(&["RID", "NAME", "ENABLED", "ACTIONS", "DELEGATIONS"], &rows)
}

/// Device and robot status, named from the cached tables when available.
pub fn status(lines: &[String], tables: Option<&CapabilityTables>) -> String {
    let device_name = |oid| {
        tables
            .and_then(|t| t.devices.get(&oid))
            .map_or_else(|| "?".to_string(), |d| d.name.clone())
    };
    let robot_name = |rid| {
        tables
            .and_then(|t| t.robots.get(&rid))
            .map_or_else(|| "?".to_string(), |r| r.name.clone())
    };
    let rows: Vec<Vec<String>> = lines
        .iter()
        .filter_map(|l| parse_status_line(l))
        .map(|s| vec![s.oid.to_string(), device_name(s.oid), s.status, s.icon_id])
        .collect();
    let mut out = table(&["OID", "NAME", "STATUS", "ICON"], &rows);
    let robots: Vec<Vec<String>> = lines
        .iter()
        .filter_map(|l| parse_robot_status_line(l))
        .map(|r| vec![r.rid.to_string(), robot_name(r.rid), r.location, r.status])
        .collect();
    if !robots.is_empty() {
        out.push('\n');
        out.push_str(&table(&["RID", "ROBOT", "LOCATION", "STATUS"], &robots));
    }
    out
}

pub fn scenarios(lines: &[String]) -> String {
    let rows: Vec<Vec<String>> = lines
        .iter()
        .filter_map(|l| fields(l, "SCN|"))
        .filter(|f| f.len() == 3)
        .map(|f| {
            let enabled = if f[1] == "1" { "yes" } else { "no" };
            vec![f[0].clone(), enabled.into(), f[2].clone()]
        })
        .collect();
    table(&["SCENARIO", "ENABLED", "TASKS"], &rows)
}

pub fn rules(lines: &[String]) -> String {
    let rows: Vec<Vec<String>> = lines
        .iter()
        .filter_map(|l| fields(l, "RULE|"))
        .filter(|f| f.len() == 3)
        .map(|f| {
            let enabled = if f[1] == "1" { "yes" } else { "no" };
            vec![f[0].clone(), enabled.into(), f[2].clone()]
        })
        .collect();
    table(&["RULE", "ENABLED", "DEFINITION"], &rows)
}

pub fn tickets(lines: &[String]) -> String {
    let rows: Vec<Vec<String>> = lines
        .iter()
        .filter_map(|l| fields(l, "TICKET|"))
        .filter(|f| f.len() == 5)
        .collect();
    table(&["TICKET", "SOURCE", "PENDING", "DISPATCHED", "CANCELLED"], &rows)
}

/// `TXT|` lines back to the text they carry; other lines unchanged.
pub fn text(lines: &[String]) -> String {
    let mut out = String::new();
    for l in lines {
        match l.strip_prefix("TXT|") {
            Some(t) => out.push_str(&unfield(t)),
            None => out.push_str(l),
        }
        out.push('\n');
    }
    out
}
