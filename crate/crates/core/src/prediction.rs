use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::naive::{self, confidence_interval, ConfidenceInterval};
use crate::retarget::{self, CovarianceMode, RetargetParams, RetargetPosition};
use crate::units::Duration;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Naive,
    Retarget,
}

/// Expected time to the halving and its spread, measured from "now".
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub model: Model,
    pub eta: Duration,
    /// Minutes squared.
    pub variance: f64,
    pub stddev: Duration,
}

impl Prediction {
    pub fn new(model: Model, eta: Duration, variance: f64) -> Result<Self> {
        if variance.is_nan() || variance < 0.0 {
            return Err(Error::invalid(format!("variance must be non-negative, got {variance}")));
        }
        Ok(Prediction {
            model,
            eta,
            variance,
            stddev: Duration::from_minutes(variance.sqrt()),
        })
    }

    pub fn naive(blocks_remaining: u64) -> Self {
        let p = naive::naive_predict(blocks_remaining);
        Prediction {
            model: Model::Naive,
            eta: p.eta,
            variance: p.variance,
            stddev: p.stddev,
        }
    }

    pub fn retarget(pos: RetargetPosition, params: &RetargetParams, mode: CovarianceMode) -> Result<Self> {
        let eta = retarget::retarget_eta(pos, params)?;
        let variance = retarget::retarget_variance(pos, params, mode)?;
        Prediction::new(Model::Retarget, eta, variance)
    }

    /// Retarget-model mean with the first-plus-last-interval variance, which
    /// ignores `n` and holds once the halving is more than an interval away.
    pub fn retarget_simplified(pos: RetargetPosition, params: &RetargetParams) -> Result<Self> {
        let eta = retarget::retarget_eta(pos, params)?;
        let variance = retarget::simplified_variance(pos.m(), params)?;
        Prediction::new(Model::Retarget, eta, variance)
    }

    /// The halving has already happened.
    pub fn reached(model: Model) -> Self {
        Prediction {
            model,
            eta: Duration::ZERO,
            variance: 0.0,
            stddev: Duration::ZERO,
        }
    }

    pub fn interval(&self, level: f64) -> Result<ConfidenceInterval> {
        confidence_interval(self.eta, self.stddev, level)
    }

    pub fn intervals(&self, levels: &[f64]) -> Result<Vec<ConfidenceInterval>> {
        levels.iter().map(|&l| self.interval(l)).collect()
    }
}
