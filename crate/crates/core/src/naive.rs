//! Constant-difficulty model.
//!
//! With a fixed difficulty matched to the hashrate every block time is an
//! independent exponential with a 10 minute mean, so for `N` remaining
//! blocks `E[T] = 10 min * N` and `V[T] = 100 min^2 * N`.
//!
//! Intervals use the normal approximation for every `N`. It is accurate for
//! large `N` and degrades below roughly 30 blocks, where `T` is visibly
//! skewed.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::two_sided_z;
use crate::units::Duration;

/// Expected time between blocks at equilibrium difficulty.
pub const BLOCK_INTERVAL: Duration = Duration::from_minutes(10.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NaivePrediction {
    pub eta: Duration,
    /// Minutes squared.
    pub variance: f64,
    pub stddev: Duration,
    pub blocks_remaining: u64,
}

pub fn naive_eta(blocks_remaining: u64) -> Duration {
    BLOCK_INTERVAL * blocks_remaining as f64
}

/// `100 min^2 * N`.
pub fn naive_variance(blocks_remaining: u64) -> f64 {
    BLOCK_INTERVAL.minutes().powi(2) * blocks_remaining as f64
}

pub fn naive_stddev(blocks_remaining: u64) -> Duration {
    BLOCK_INTERVAL * (blocks_remaining as f64).sqrt()
}

/// `sqrt(10 min * E[T])`, for callers that only have an expected time.
pub fn naive_stddev_from_eta(eta: Duration) -> Result<Duration> {
    if eta.minutes().is_nan() || eta.minutes() < 0.0 {
        return Err(Error::invalid(format!(
            "expected time must be non-negative, got {} min",
            eta.minutes()
        )));
    }
    Ok(Duration::from_minutes(
        (BLOCK_INTERVAL.minutes() * eta.minutes()).sqrt(),
    ))
}

pub fn naive_predict(blocks_remaining: u64) -> NaivePrediction {
    NaivePrediction {
        eta: naive_eta(blocks_remaining),
        variance: naive_variance(blocks_remaining),
        stddev: naive_stddev(blocks_remaining),
        blocks_remaining,
    }
}

/// A symmetric interval `eta +/- z * stddev` holding the halving with
/// probability `level` under the normal approximation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub level: f64,
    pub lower: Duration,
    pub upper: Duration,
}

impl ConfidenceInterval {
    pub fn contains(&self, t: Duration) -> bool {
        self.lower <= t && t <= self.upper
    }

    pub fn center(&self) -> Duration {
        (self.lower + self.upper) * 0.5
    }
}

pub fn confidence_interval(eta: Duration, stddev: Duration, level: f64) -> Result<ConfidenceInterval> {
    if stddev.minutes().is_nan() || stddev.minutes() < 0.0 {
        return Err(Error::invalid(format!(
            "standard deviation must be non-negative, got {} min",
            stddev.minutes()
        )));
    }
    let half_width = stddev * two_sided_z(level)?;
    Ok(ConfidenceInterval {
        level,
        lower: eta - half_width,
        upper: eta + half_width,
    })
}
