//! Corrections to the expected halving time for hashrate changes.
//!
//! A hashrate change only moves the schedule until the next retarget brings
//! the block rate back to target, so its effect is bounded by the length of
//! the interval in which it happens:
//!
//! * a small step change `x` well before the halving shifts the schedule by
//!   about `x` retarget intervals;
//! * a slow change from `H1` to `H2` compounds to `ln(H2/H1)` intervals;
//! * a step inside the final interval shifts by `x` times the blocks left.
//!
//! All shifts are signed, negative meaning the halving comes sooner. The
//! variance of a prediction is left untouched by these corrections.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::Prediction;
use crate::retarget::RetargetParams;
use crate::units::Duration;

/// Largest step (as a fraction) for which the linear rule is used.
pub const LINEAR_STEP_LIMIT: f64 = 0.15;

/// Network hashrate in hashes per minute.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hashrate(f64);

impl Hashrate {
    pub fn new(per_minute: f64) -> Result<Self> {
        if !(per_minute > 0.0 && per_minute.is_finite()) {
            return Err(Error::invalid(format!("hashrate must be positive, got {per_minute}")));
        }
        Ok(Hashrate(per_minute))
    }

    pub fn per_minute(self) -> f64 {
        self.0
    }

    pub fn per_second(self) -> f64 {
        self.0 / 60.0
    }

    /// Hashrate at which blocks arrive every `block_target` on average at
    /// difficulty `difficulty` (`2^32 * D / block_target`).
    pub fn equilibrium(difficulty: f64, block_target: Duration) -> Result<Self> {
        Hashrate::new(crate::sim::HASHES_PER_DIFFICULTY * difficulty / block_target.minutes())
    }
}

/// A schedule shift, with a note when the estimate left its range of validity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShiftEstimate {
    pub shift: Duration,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Shift from a step change of `fraction` (0.10 = +10%) happening more than
/// one retarget interval before the halving: `-fraction * target`.
///
/// Beyond [`LINEAR_STEP_LIMIT`] the log rule `-ln(1 + fraction) * target` is
/// used instead and the result carries a warning.
pub fn step_shift_far(fraction: f64, params: &RetargetParams) -> Result<ShiftEstimate> {
    if !(fraction > -1.0 && fraction.is_finite()) {
        return Err(Error::invalid(format!(
            "hashrate change must be greater than -100%, got {fraction}"
        )));
    }
    let target = params.retarget_target();
    if fraction.abs() <= LINEAR_STEP_LIMIT {
        return Ok(ShiftEstimate {
            shift: -(target * fraction),
            warning: None,
        });
    }
    Ok(ShiftEstimate {
        shift: -(target * fraction.ln_1p()),
        warning: Some(format!(
            "step of {:+.1}% exceeds the linear range of +/-{:.0}%; used the log rule",
            fraction * 100.0,
            LINEAR_STEP_LIMIT * 100.0
        )),
    })
}

/// Shift from a change `old -> new` spread over many retarget intervals:
/// `-ln(new / old) * target`.
pub fn gradual_shift(old: Hashrate, new: Hashrate, params: &RetargetParams) -> Duration {
    // difference of logs, so swapping the arguments negates the result exactly
    -(params.retarget_target() * (new.0.ln() - old.0.ln()))
}

/// Shift from a step change inside the final retarget interval, with
/// `blocks_remaining` blocks still to mine: `-fraction * blocks * block_target`.
pub fn step_shift_near(fraction: f64, blocks_remaining: u64, params: &RetargetParams) -> Result<Duration> {
    if blocks_remaining >= params.k() as u64 {
        return Err(Error::invalid(format!(
            "{blocks_remaining} blocks remaining is not inside the final {}-block interval; use the far-step rule",
            params.k()
        )));
    }
    if !fraction.is_finite() {
        return Err(Error::invalid("hashrate change must be finite"));
    }
    Ok(-(params.block_target() * (fraction * blocks_remaining as f64)))
}

/// Translates the expected time by `shift`, keeping the variance.
pub fn apply_shift(prediction: &Prediction, shift: Duration) -> Prediction {
    Prediction {
        eta: prediction.eta + shift,
        ..*prediction
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HashrateChange {
    StepFar { fraction: f64 },
    Gradual { old: Hashrate, new: Hashrate },
    StepNear { fraction: f64, blocks_remaining: u64 },
}

impl HashrateChange {
    pub fn shift(&self, params: &RetargetParams) -> Result<ShiftEstimate> {
        match *self {
            HashrateChange::StepFar { fraction } => step_shift_far(fraction, params),
            HashrateChange::Gradual { old, new } => Ok(ShiftEstimate {
                shift: gradual_shift(old, new, params),
                warning: None,
            }),
            HashrateChange::StepNear {
                fraction,
                blocks_remaining,
            } => Ok(ShiftEstimate {
                shift: step_shift_near(fraction, blocks_remaining, params)?,
                warning: None,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prediction::Model;
    use crate::units::{TimeUnit, Timestamp};
    use proptest::prelude::*;

    fn h(x: f64) -> Hashrate {
        Hashrate::new(x).unwrap()
    }

    #[test]
    fn far_step_examples() {
        let p = RetargetParams::bitcoin();
        let up = step_shift_far(0.10, &p).unwrap();
        assert!(up.warning.is_none());
        assert!((up.shift.to_unit(TimeUnit::Hour) + 33.6).abs() < 1e-9);
        assert_eq!(step_shift_far(0.0, &p).unwrap().shift.minutes(), 0.0);
        let down = step_shift_far(-0.10, &p).unwrap();
        assert!((down.shift.to_unit(TimeUnit::Hour) - 33.6).abs() < 1e-9);
    }

    #[test]
    fn large_step_warns_and_uses_log_rule() {
        let p = RetargetParams::bitcoin();
        let big = step_shift_far(0.5, &p).unwrap();
        assert!(big.warning.is_some());
        assert_eq!(big.shift, gradual_shift(h(1.0), h(1.5), &p));
        assert!(step_shift_far(-1.0, &p).is_err());
        assert!(step_shift_far(f64::NAN, &p).is_err());
    }

    #[test]
    fn gradual_examples() {
        let p = RetargetParams::bitcoin();
        let shift = gradual_shift(h(1.0), h(1.5), &p);
        // ln 1.5 = 0.405465 of two weeks, about 5 days 16 hours
        assert!((shift.minutes() + 1.5f64.ln() * 20160.0).abs() < 1e-9);
        assert!((shift.minutes() + 8160.0).abs() < 15.0);
        assert_eq!(gradual_shift(h(3.0), h(3.0), &p), Duration::ZERO);
        let twice = gradual_shift(h(1.0), h(2.0), &p) + gradual_shift(h(2.0), h(4.0), &p);
        assert!((twice - gradual_shift(h(1.0), h(4.0), &p)).minutes().abs() < 1e-9);
    }

    #[test]
    fn near_step_examples() {
        let p = RetargetParams::bitcoin();
        assert!((step_shift_near(0.05, 300, &p).unwrap().minutes() + 150.0).abs() < 1e-9);
        assert_eq!(step_shift_near(0.0, 1000, &p).unwrap().minutes(), 0.0);
        assert_eq!(step_shift_near(0.05, 0, &p).unwrap().minutes(), 0.0);
        assert!(step_shift_near(0.05, 2016, &p).is_err());
    }

    #[test]
    fn shifting_a_dated_prediction() {
        let p = RetargetParams::bitcoin();
        let now = Timestamp::parse("2016-06-02 23:50").unwrap();
        let base_at = Timestamp::parse("2016-07-11 01:00").unwrap();
        let base = Prediction::new(Model::Retarget, now.until(base_at), 493_000.0).unwrap();
        let shifted = apply_shift(&base, gradual_shift(h(1.0), h(1.5), &p));
        assert_eq!(shifted.variance, base.variance);
        let at = now.add_duration(shifted.eta).unwrap();
        // 2016-07-11 01:00 minus 8174.2 minutes
        assert_eq!(at.to_string(), "2016-07-05 08:46");
    }

    #[test]
    fn inverse_shifts_cancel() {
        let base = Prediction::naive(1000);
        let d = Duration::from_minutes(150.0);
        assert_eq!(apply_shift(&apply_shift(&base, d), -d), base);
        assert_eq!(apply_shift(&base, Duration::ZERO), base);
    }

    #[test]
    fn change_enum_dispatch() {
        let p = RetargetParams::bitcoin();
        let near = HashrateChange::StepNear { fraction: 0.05, blocks_remaining: 300 };
        assert!((near.shift(&p).unwrap().shift.minutes() + 150.0).abs() < 1e-9);
        let grad = HashrateChange::Gradual { old: h(1.0), new: h(2.0) };
        assert!(grad.shift(&p).unwrap().shift.minutes() < 0.0);
    }

    #[test]
    fn hashrate_validation() {
        assert!(Hashrate::new(0.0).is_err());
        assert!(Hashrate::new(-1.0).is_err());
        assert!(Hashrate::new(f64::INFINITY).is_err());
    }

    proptest! {
        #[test]
        fn gradual_is_antisymmetric(a in 1e-3f64..1e12, b in 1e-3f64..1e12) {
            let p = RetargetParams::bitcoin();
            prop_assert_eq!(gradual_shift(h(a), h(b), &p), -gradual_shift(h(b), h(a), &p));
        }

        #[test]
        fn gradual_composes(a in 1e-3f64..1e12, b in 1e-3f64..1e12, c in 1e-3f64..1e12) {
            let p = RetargetParams::bitcoin();
            let two = gradual_shift(h(a), h(b), &p) + gradual_shift(h(b), h(c), &p);
            let one = gradual_shift(h(a), h(c), &p);
            prop_assert!((two - one).minutes().abs() <= 1e-9 * one.minutes().abs().max(1.0));
        }

        #[test]
        fn small_steps_agree_with_log_rule(x in -0.15f64..0.15) {
            let p = RetargetParams::bitcoin();
            let linear = step_shift_far(x, &p).unwrap().shift;
            let log = gradual_shift(h(1.0), h(1.0 + x), &p);
            prop_assert!((linear - log).minutes().abs() <= x * x * p.retarget_target().minutes());
        }

        #[test]
        fn near_step_is_linear(x in -0.5f64..0.5, y in -0.5f64..0.5, blocks in 0u64..1000) {
            let p = RetargetParams::bitcoin();
            let f = |x, b| step_shift_near(x, b, &p).unwrap().minutes();
            prop_assert!((f(x + y, blocks) - f(x, blocks) - f(y, blocks)).abs() < 1e-6);
            prop_assert!((f(x, 2 * blocks) - 2.0 * f(x, blocks)).abs() < 1e-6);
        }
    }
}
