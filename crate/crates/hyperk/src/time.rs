//! Minute-resolution timestamps.
//!
//! All clinical window arithmetic runs on integer minutes since the Unix
//! epoch: the ingest layer parses ISO-8601 strings once, everything
//! downstream stays in exact integer math.

use crate::error::{Error, Result};
use chrono::{DateTime, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use std::fmt;

pub const MINUTES_PER_HOUR: i64 = 60;
pub const MINUTES_PER_DAY: i64 = 24 * 60;

/// Minutes since the Unix epoch (UTC).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn minutes(self) -> i64 {
        self.0
    }

    pub fn add_minutes(self, m: i64) -> Timestamp {
        Timestamp(self.0 + m)
    }

    pub fn add_hours(self, h: i64) -> Timestamp {
        Timestamp(self.0 + h * MINUTES_PER_HOUR)
    }

    pub fn add_days(self, d: i64) -> Timestamp {
        Timestamp(self.0 + d * MINUTES_PER_DAY)
    }

    /// Parse an ISO-8601 timestamp, truncating to minute resolution.
    ///
    /// Accepts `YYYY-MM-DDTHH:MM`, with optional `:SS`, optional trailing
    /// `Z`, and a space in place of `T`. Naive times are taken as UTC.
    pub fn parse(s: &str) -> Result<Timestamp> {
        let s = s.trim();
        let normalized = s.replace(' ', "T");
        let body = normalized.strip_suffix('Z').unwrap_or(&normalized);
        let formats = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M"];
        for fmt in formats {
            if let Ok(dt) = NaiveDateTime::parse_from_str(body, fmt) {
                return Ok(Timestamp(dt.and_utc().timestamp() / 60));
            }
        }
        Err(Error::data(format!("unparsable timestamp {s:?}")))
    }

    fn to_datetime(self) -> DateTime<Utc> {
        Utc.timestamp_opt(self.0 * 60, 0).unwrap()
    }

    /// 1-based day index relative to `anchor`: the day containing the
    /// anchor is day 1 (`[anchor, anchor+24h)`).
    pub fn day_index_from(self, anchor: Timestamp) -> i64 {
        debug_assert!(self.0 >= anchor.0);
        (self.0 - anchor.0).div_euclid(MINUTES_PER_DAY) + 1
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_datetime().format("%Y-%m-%dT%H:%M:%SZ"))
    }
}
