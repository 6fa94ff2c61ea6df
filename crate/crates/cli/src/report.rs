use std::fmt::Write as _;

use halving_core::{ConfidenceInterval, Duration, Model, Prediction, Timestamp};
use serde::Serialize;

/// JSON shape shared by `predict`, `interval` and `adjust`.
///
/// Durations are plain minutes; timestamps are RFC 3339 UTC and `null`
/// without a reference time.
#[derive(Debug, Serialize)]
pub struct OutputReport<E: Serialize> {
    pub model: Model,
    pub eta_timestamp: Option<Timestamp>,
    pub eta_minutes: f64,
    pub stddev_minutes: f64,
    pub variance_minutes2: f64,
    pub intervals: Vec<IntervalReport>,
    pub shift_minutes: Option<f64>,
    pub warnings: Vec<String>,
    pub inputs_echo: E,
}

#[derive(Debug, Serialize)]
pub struct IntervalReport {
    pub level: f64,
    pub lower_minutes: f64,
    pub upper_minutes: f64,
    pub lower_timestamp: Option<Timestamp>,
    pub upper_timestamp: Option<Timestamp>,
}

impl IntervalReport {
    fn new(ci: ConfidenceInterval, now: Option<Timestamp>) -> anyhow::Result<Self> {
        Ok(IntervalReport {
            level: ci.level,
            lower_minutes: ci.lower.minutes(),
            upper_minutes: ci.upper.minutes(),
            lower_timestamp: now.map(|t| t.add_duration(ci.lower)).transpose()?,
            upper_timestamp: now.map(|t| t.add_duration(ci.upper)).transpose()?,
        })
    }
}

impl<E: Serialize> OutputReport<E> {
    pub fn new(
        prediction: &Prediction,
        levels: &[f64],
        now: Option<Timestamp>,
        shift: Option<Duration>,
        warnings: Vec<String>,
        inputs_echo: E,
    ) -> anyhow::Result<Self> {
        let intervals = prediction
            .intervals(levels)?
            .into_iter()
            .map(|ci| IntervalReport::new(ci, now))
            .collect::<anyhow::Result<_>>()?;
        Ok(OutputReport {
            model: prediction.model,
            eta_timestamp: now.map(|t| t.add_duration(prediction.eta)).transpose()?,
            eta_minutes: prediction.eta.minutes(),
            stddev_minutes: prediction.stddev.minutes(),
            variance_minutes2: prediction.variance,
            intervals,
            shift_minutes: shift.map(Duration::minutes),
            warnings,
            inputs_echo,
        })
    }

    /// Human-readable rendering; `inputs` are label/value lines shown first.
    pub fn render(&self, inputs: &[(String, String)]) -> String {
        let mut s = String::new();
        for (label, value) in inputs {
            let _ = writeln!(s, "{label:<12}{value}");
        }
        let model = match self.model {
            Model::Naive => "naive",
            Model::Retarget => "retarget",
        };
        let _ = writeln!(s, "{:<12}{model}", "model");
        if let Some(shift) = self.shift_minutes {
            let _ = writeln!(s, "{:<12}{}", "shift", Duration::from_minutes(shift).to_mixed_string());
        }
        let eta = Duration::from_minutes(self.eta_minutes).to_mixed_string();
        match self.eta_timestamp {
            Some(t) => {
                let _ = writeln!(s, "{:<12}{t} UTC  (in {eta})", "eta");
            }
            None => {
                let _ = writeln!(s, "{:<12}{eta}", "eta");
            }
        }
        let _ = writeln!(
            s,
            "{:<12}{}",
            "stddev",
            Duration::from_minutes(self.stddev_minutes).to_mixed_string()
        );
        for ci in &self.intervals {
            let label = format!("{} CI", level_label(ci.level));
            match (ci.lower_timestamp, ci.upper_timestamp) {
                (Some(lo), Some(hi)) => {
                    let _ = writeln!(s, "{label:<12}{lo} .. {hi}");
                }
                _ => {
                    let _ = writeln!(
                        s,
                        "{label:<12}{} .. {}",
                        Duration::from_minutes(ci.lower_minutes).to_mixed_string(),
                        Duration::from_minutes(ci.upper_minutes).to_mixed_string()
                    );
                }
            }
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

/// `0.683` -> `68.3%`, `0.95` -> `95%`.
pub fn level_label(level: f64) -> String {
    let pct = format!("{:.4}", level * 100.0);
    let pct = pct.trim_end_matches('0').trim_end_matches('.');
    format!("{pct}%")
}

pub fn to_json<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}
