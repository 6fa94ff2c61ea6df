//! Time representation shared by every model.
//!
//! All arithmetic happens in real-valued minutes. Conversion to hours, days,
//! weeks, months and years uses the fixed table below (a month is 43830
//! minutes and a year 526000, not the 365.25-day values) and only happens at
//! presentation time.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MINUTES_PER_HOUR: f64 = 60.0;
pub const MINUTES_PER_DAY: f64 = 1440.0;
pub const MINUTES_PER_WEEK: f64 = 10080.0;
pub const MINUTES_PER_MONTH: f64 = 43830.0;
pub const MINUTES_PER_YEAR: f64 = 526000.0;

/// A span of time in minutes.
///
/// Estimator outputs are non-negative; hashrate shifts use the same type with
/// a sign (negative means the halving arrives sooner).
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Duration(f64);

impl Duration {
    pub const ZERO: Duration = Duration(0.0);

    pub const fn from_minutes(minutes: f64) -> Self {
        Duration(minutes)
    }

    pub fn from_unit(value: f64, unit: TimeUnit) -> Self {
        Duration(value * unit.minutes())
    }

    pub const fn minutes(self) -> f64 {
        self.0
    }

    pub fn to_unit(self, unit: TimeUnit) -> f64 {
        self.0 / unit.minutes()
    }

    pub fn abs(self) -> Self {
        Duration(self.0.abs())
    }

    /// Renders in mixed units, e.g. `38day+40min` or `12hr+20min`, rounded to
    /// the nearest minute.
    pub fn to_mixed_string(self) -> String {
        let total = self.0.abs().round() as u64;
        let (days, rest) = (total / 1440, total % 1440);
        let (hours, minutes) = (rest / 60, rest % 60);
        let mut parts = Vec::with_capacity(3);
        if days > 0 {
            parts.push(format!("{days}day"));
        }
        if hours > 0 {
            parts.push(format!("{hours}hr"));
        }
        if minutes > 0 || parts.is_empty() {
            parts.push(format!("{minutes}min"));
        }
        let sign = if self.0 < 0.0 && total > 0 { "-" } else { "" };
        format!("{sign}{}", parts.join("+"))
    }
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_mixed_string())
    }
}

impl Add for Duration {
    type Output = Duration;
    fn add(self, rhs: Duration) -> Duration {
        Duration(self.0 + rhs.0)
    }
}

impl AddAssign for Duration {
    fn add_assign(&mut self, rhs: Duration) {
        self.0 += rhs.0;
    }
}

impl Sub for Duration {
    type Output = Duration;
    fn sub(self, rhs: Duration) -> Duration {
        Duration(self.0 - rhs.0)
    }
}

impl Neg for Duration {
    type Output = Duration;
    fn neg(self) -> Duration {
        Duration(-self.0)
    }
}

impl Mul<f64> for Duration {
    type Output = Duration;
    fn mul(self, rhs: f64) -> Duration {
        Duration(self.0 * rhs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Minute,
    Hour,
    Day,
    Week,
    Month,
    Year,
}

impl TimeUnit {
    pub const ALL: [TimeUnit; 6] = [
        TimeUnit::Minute,
        TimeUnit::Hour,
        TimeUnit::Day,
        TimeUnit::Week,
        TimeUnit::Month,
        TimeUnit::Year,
    ];

    pub const fn minutes(self) -> f64 {
        match self {
            TimeUnit::Minute => 1.0,
            TimeUnit::Hour => MINUTES_PER_HOUR,
            TimeUnit::Day => MINUTES_PER_DAY,
            TimeUnit::Week => MINUTES_PER_WEEK,
            TimeUnit::Month => MINUTES_PER_MONTH,
            TimeUnit::Year => MINUTES_PER_YEAR,
        }
    }
}

impl FromStr for TimeUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "min" | "minute" | "minutes" => Ok(TimeUnit::Minute),
            "hr" | "hour" | "hours" => Ok(TimeUnit::Hour),
            "day" | "days" => Ok(TimeUnit::Day),
            "week" | "weeks" => Ok(TimeUnit::Week),
            "month" | "months" => Ok(TimeUnit::Month),
            "year" | "years" => Ok(TimeUnit::Year),
            other => Err(Error::invalid(format!("unknown time unit {other:?}"))),
        }
    }
}

/// Converts `d` to a count of `unit`s.
pub fn to_unit(d: Duration, unit: TimeUnit) -> f64 {
    d.to_unit(unit)
}

/// A UTC instant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(DateTime<Utc>);

const PARSE_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
];

impl Timestamp {
    pub fn from_datetime(dt: DateTime<Utc>) -> Self {
        Timestamp(dt)
    }

    pub fn from_unix(seconds: i64) -> Result<Self> {
        DateTime::from_timestamp(seconds, 0)
            .map(Timestamp)
            .ok_or(Error::TimestampOverflow)
    }

    pub fn now() -> Self {
        Timestamp(Utc::now())
    }

    pub fn unix(self) -> i64 {
        self.0.timestamp()
    }

    pub fn datetime(self) -> DateTime<Utc> {
        self.0
    }

    /// Parses RFC 3339 or a bare `YYYY-MM-DD[T ]HH:MM[:SS][Z]`, always as UTC.
    pub fn parse(s: &str) -> Result<Self> {
        let trimmed = s.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(trimmed) {
            return Ok(Timestamp(dt.with_timezone(&Utc)));
        }
        let bare = trimmed.strip_suffix('Z').unwrap_or(trimmed);
        PARSE_FORMATS
            .iter()
            .find_map(|fmt| NaiveDateTime::parse_from_str(bare, fmt).ok())
            .map(|naive| Timestamp(naive.and_utc()))
            .ok_or_else(|| Error::TimestampParse(s.to_string()))
    }

    /// Calendar addition, rounded to whole seconds.
    pub fn add_duration(self, d: Duration) -> Result<Self> {
        let seconds = d.minutes() * 60.0;
        if !seconds.is_finite() || seconds.abs() > i64::MAX as f64 / 2.0 {
            return Err(Error::TimestampOverflow);
        }
        let delta = TimeDelta::try_seconds(seconds.round() as i64).ok_or(Error::TimestampOverflow)?;
        self.0
            .checked_add_signed(delta)
            .map(Timestamp)
            .ok_or(Error::TimestampOverflow)
    }

    pub fn sub_duration(self, d: Duration) -> Result<Self> {
        self.add_duration(-d)
    }

    /// Signed span from `self` to `later`.
    pub fn until(self, later: Timestamp) -> Duration {
        Duration::from_minutes((later.0 - self.0).num_seconds() as f64 / 60.0)
    }

    /// Formats as `YYYY-MM-DD HH:MM`, rounded to the nearest minute.
    pub fn to_minute_string(self) -> String {
        let rounded = DateTime::from_timestamp(((self.unix() as f64) / 60.0).round() as i64 * 60, 0)
            .unwrap_or(self.0);
        rounded.format("%Y-%m-%d %H:%M").to_string()
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_minute_string())
    }
}

impl FromStr for Timestamp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Timestamp::parse(s)
    }
}

/// `t + d`, at one-second resolution.
pub fn add_duration(t: Timestamp, d: Duration) -> Result<Timestamp> {
    t.add_duration(d)
}
