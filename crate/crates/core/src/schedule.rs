//! Subsidy schedule: halving heights, block rewards and the supply cap.
//!
//! The subsidy is modeled as a real number (no satoshi truncation), so the
//! total supply is exactly the geometric series `210000 * sum 50 * 2^-i`.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Blocks between subsidy halvings.
pub const HALVING_INTERVAL: u64 = 210_000;

/// Subsidy of the first epoch, in BTC.
pub const INITIAL_SUBSIDY: f64 = 50.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockHeight(pub u64);

impl BlockHeight {
    pub const fn new(height: u64) -> Self {
        BlockHeight(height)
    }

    pub const fn get(self) -> u64 {
        self.0
    }

    /// Index of the subsidy epoch containing this height.
    pub const fn epoch(self) -> u64 {
        self.0 / HALVING_INTERVAL
    }
}

impl fmt::Display for BlockHeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u64> for BlockHeight {
    fn from(h: u64) -> Self {
        BlockHeight(h)
    }
}

/// Block subsidy in BTC.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Subsidy(pub f64);

impl Subsidy {
    pub const fn btc(self) -> f64 {
        self.0
    }
}

/// Subsidy for the given epoch: `50 * 2^-epoch`.
pub fn subsidy_for_epoch(epoch: u64) -> Subsidy {
    let exponent = i32::try_from(epoch).unwrap_or(i32::MAX);
    Subsidy(INITIAL_SUBSIDY * 0.5f64.powi(exponent))
}

pub fn subsidy_at_height(h: BlockHeight) -> Subsidy {
    subsidy_for_epoch(h.epoch())
}

/// First halving boundary strictly above `h`.
pub fn next_halving_height(h: BlockHeight) -> BlockHeight {
    BlockHeight((h.epoch() + 1) * HALVING_INTERVAL)
}

/// Height at which `epoch` begins.
pub fn halving_height(epoch: u64) -> BlockHeight {
    BlockHeight(epoch * HALVING_INTERVAL)
}

/// Limit of the supply series, 21 million BTC.
pub fn total_supply_limit() -> f64 {
    HALVING_INTERVAL as f64 * INITIAL_SUBSIDY * 2.0
}

/// Supply issued by the first `epochs` epochs: `21e6 * (1 - 2^-epochs)`.
pub fn supply_after_epochs(epochs: u64) -> f64 {
    let exponent = i32::try_from(epochs).unwrap_or(i32::MAX);
    total_supply_limit() * (1.0 - 0.5f64.powi(exponent))
}

/// One row of the halving table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpochRow {
    pub epoch: u64,
    pub height: BlockHeight,
    pub subsidy: Subsidy,
    /// Supply once this epoch is fully mined.
    pub cumulative_supply: f64,
}

/// Rows for epochs `0..=last_epoch`.
pub fn schedule_table(last_epoch: u64) -> Vec<EpochRow> {
    (0..=last_epoch)
        .map(|epoch| EpochRow {
            epoch,
            height: halving_height(epoch),
            subsidy: subsidy_for_epoch(epoch),
            cumulative_supply: supply_after_epochs(epoch + 1),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn subsidies() {
        assert_eq!(subsidy_at_height(BlockHeight(0)).btc(), 50.0);
        assert_eq!(subsidy_at_height(BlockHeight(419_999)).btc(), 25.0);
        assert_eq!(subsidy_at_height(BlockHeight(420_000)).btc(), 12.5);
        assert_eq!(subsidy_for_epoch(u64::MAX).btc(), 0.0);
    }

    #[test]
    fn next_halving() {
        assert_eq!(next_halving_height(BlockHeight(414_524)), BlockHeight(420_000));
        assert_eq!(next_halving_height(BlockHeight(0)), BlockHeight(210_000));
        assert_eq!(next_halving_height(BlockHeight(420_000)), BlockHeight(630_000));
    }

    #[test]
    fn supply_cap() {
        assert_eq!(total_supply_limit(), 21_000_000.0);
        assert_eq!(supply_after_epochs(1), 10_500_000.0);
        assert_eq!(supply_after_epochs(2), 15_750_000.0);
        assert_eq!(supply_after_epochs(0), 0.0);
    }

    #[test]
    fn closed_form_matches_summed_series() {
        let mut running = 0.0;
        for e in 0..60u64 {
            assert!((supply_after_epochs(e) - running).abs() < 1e-6);
            running += HALVING_INTERVAL as f64 * subsidy_for_epoch(e).btc();
        }
    }

    #[test]
    fn table_rows() {
        let rows = schedule_table(33);
        assert_eq!(rows[0].height, BlockHeight(0));
        assert_eq!(rows[0].subsidy.btc(), 50.0);
        assert_eq!(rows[2].height, BlockHeight(420_000));
        assert_eq!(rows[2].subsidy.btc(), 12.5);
        let last = rows[33].cumulative_supply;
        assert!(last <= 21_000_000.0 && 21_000_000.0 - last < 1.0);
        assert!(rows.windows(2).all(|w| w[0].cumulative_supply < w[1].cumulative_supply));
    }

    proptest! {
        #[test]
        fn halving_halves(h in 0u64..10_000_000) {
            let now = subsidy_at_height(BlockHeight(h)).btc();
            let later = subsidy_at_height(BlockHeight(h + HALVING_INTERVAL)).btc();
            prop_assert_eq!(later, now / 2.0);
        }

        #[test]
        fn next_halving_is_within_one_epoch(h in 0u64..u64::MAX / 2) {
            let gap = next_halving_height(BlockHeight(h)).get() - h;
            prop_assert!((1..=HALVING_INTERVAL).contains(&gap));
        }

        #[test]
        fn partial_sum_gap(e in 0u64..60) {
            let gap = total_supply_limit() - supply_after_epochs(e);
            let expected = 21e6 * 0.5f64.powi(e as i32);
            prop_assert!((gap - expected).abs() <= 1e-6 * expected.max(1.0));
        }
    }
}
