//! Mapping from step indices to calendar time.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
use serde::{Deserialize, Deserializer, Serializer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calendar {
    pub start: NaiveDateTime,
    pub timestep_hours: f64,
}

impl Calendar {
    pub fn new(start: NaiveDateTime, timestep_hours: f64) -> Self {
        Self { start, timestep_hours }
    }

    pub fn datetime(&self, step: usize) -> NaiveDateTime {
        let ms = (step as f64 * self.timestep_hours * 3_600_000.0).round() as i64;
        self.start + Duration::milliseconds(ms)
    }

    /// `(month 1..=12, hour 1..=24)` of the step; hour `h + 1` covers `[h:00, h+1:00)`.
    pub fn month_hour(&self, step: usize) -> (u8, u8) {
        let dt = self.datetime(step);
        (dt.month() as u8, dt.hour() as u8 + 1)
    }

    pub fn is_weekend(&self, step: usize) -> bool {
        matches!(self.datetime(step).weekday(), Weekday::Sat | Weekday::Sun)
    }

    /// Number of whole steps per day, if the timestep divides a day evenly.
    pub fn steps_per_day(&self) -> Option<usize> {
        steps_per_day(self.timestep_hours)
    }
}

pub fn steps_per_day(timestep_hours: f64) -> Option<usize> {
    if !(timestep_hours.is_finite() && timestep_hours > 0.0) {
        return None;
    }
    let n = 24.0 / timestep_hours;
    let r = n.round();
    ((n - r).abs() < 1e-9 && r >= 1.0).then_some(r as usize)
}

pub fn default_start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2022, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date")
}

/// Accepts `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM[:SS]` or `YYYY-MM-DD HH:MM[:SS]`.
pub fn parse_start(s: &str) -> Result<NaiveDateTime, String> {
    let s = s.trim();
    for fmt in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt);
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .ok_or_else(|| format!("cannot parse calendar start `{s}`"))
}

pub(crate) mod serde_start {
    use super::*;

    pub fn serialize<S: Serializer>(dt: &NaiveDateTime, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&dt.format("%Y-%m-%dT%H:%M:%S"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDateTime, D::Error> {
        let s = String::deserialize(d)?;
        parse_start(&s).map_err(serde::de::Error::custom)
    }
}
