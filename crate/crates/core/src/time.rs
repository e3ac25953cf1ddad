//! Instants and wall-clock helpers.
//!
//! All instants are whole seconds since the Unix epoch. Wall-clock times of
//! day are interpreted in UTC so that traces never depend on the host zone.

use std::fmt;

use serde::{Deserialize, Serialize};

pub const SECONDS_PER_MINUTE: i64 = 60;
pub const SECONDS_PER_DAY: i64 = 86_400;

/// A point in time with one-second resolution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Instant(pub i64);

impl Instant {
    pub const fn from_secs(secs: i64) -> Self {
        Instant(secs)
    }

    /// Midnight of `year-month-day` plus `hour:minute`, in UTC.
    pub fn from_ymd_hm(year: i32, month: u32, day: u32, hour: u32, minute: u32) -> Option<Self> {
        let date = chrono::NaiveDate::from_ymd_opt(year, month, day)?;
        let dt = date.and_hms_opt(hour, minute, 0)?;
        Some(Instant(dt.and_utc().timestamp()))
    }

    pub const fn secs(self) -> i64 {
        self.0
    }

    pub const fn plus_secs(self, secs: i64) -> Self {
        Instant(self.0 + secs)
    }

    pub const fn plus_minutes(self, minutes: i64) -> Self {
        Instant(self.0 + minutes * SECONDS_PER_MINUTE)
    }

    /// Seconds elapsed since midnight of this instant's day.
    pub fn second_of_day(self) -> i64 {
        self.0.rem_euclid(SECONDS_PER_DAY)
    }

    pub fn start_of_day(self) -> Self {
        Instant(self.0 - self.second_of_day())
    }

    /// The first instant at or after `self` whose wall-clock time is `hour:minute`.
    pub fn next_wall_time(self, hour: u8, minute: u8) -> Self {
        let target = i64::from(hour) * 3600 + i64::from(minute) * SECONDS_PER_MINUTE;
        let candidate = self.start_of_day().plus_secs(target);
        if candidate >= self {
            candidate
        } else {
            candidate.plus_secs(SECONDS_PER_DAY)
        }
    }

    /// ISO-8601 with a `Z` suffix, e.g. `2026-01-05T10:00:00Z`.
    pub fn to_iso8601(self) -> String {
        match chrono::DateTime::from_timestamp(self.0, 0) {
            Some(dt) => dt.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            None => format!("@{}", self.0),
        }
    }

    pub fn parse_iso8601(text: &str) -> Option<Self> {
        chrono::DateTime::parse_from_rfc3339(text.trim())
            .ok()
            .map(|dt| Instant(dt.timestamp()))
    }

    /// `HH:MM` of the wall clock.
    pub fn hhmm(self) -> String {
        let s = self.second_of_day();
        format!("{:02}:{:02}", s / 3600, (s / 60) % 60)
    }
}

impl fmt::Display for Instant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso8601())
    }
}
