//! Prediction of block-reward halving times.
//!
//! Three models of increasing fidelity are provided:
//!
//! * [`naive`]: constant difficulty, every block an independent exponential
//!   with a 10 minute mean.
//! * [`retarget`]: difficulty retargeting every `k` blocks, which couples
//!   consecutive retarget intervals and collapses the long-range variance.
//! * [`hashrate`]: point corrections to the expected time for step and
//!   gradual hashrate changes.
//!
//! Every closed form is checked against the seeded Monte Carlo simulator in
//! [`sim`], which reproduces the block arrival and retarget process directly.
//! [`ingest`] turns chain data (heights, timestamps, difficulty) into model
//! inputs.

pub mod error;
pub mod hashrate;
pub mod ingest;
pub mod naive;
pub mod prediction;
pub mod retarget;
pub mod schedule;
pub mod sim;
pub mod stats;
pub mod units;

pub use error::{Error, IngestError, Result};
pub use hashrate::{Hashrate, HashrateChange, ShiftEstimate};
pub use ingest::{ChainSnapshot, HeaderRecord, ModelInputs};
pub use naive::{ConfidenceInterval, NaivePrediction};
pub use prediction::{Model, Prediction};
pub use retarget::{CovarianceMode, ErlangMoments, RetargetParams, RetargetPosition};
pub use schedule::{BlockHeight, Subsidy};
pub use sim::{CovarianceEstimate, Granularity, SimulationConfig, SimulationSummary};
pub use units::{Duration, TimeUnit, Timestamp};
