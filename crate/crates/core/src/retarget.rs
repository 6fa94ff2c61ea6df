//! Retarget-aware halving model.
//!
//! Difficulty is recalculated every `k` blocks as `D <- D * target / t`, where
//! `target` is the intended duration of `k` blocks (2 weeks for Bitcoin) and
//! `t` the time they actually took. Writing `r_i = t_i / s_i` for the ratio of
//! actual to expected duration of interval `i`, each `r_i` is
//! `Erlang(k, k)` and independent, and the retarget law gives
//!
//! ```text
//! t_i = (r_i / r_{i-1}) * target          for the full intervals 1..n-1
//! t_n = (r_n / r_{n-1}) * M * block_time  with r_n ~ Erlang(M, M)
//! ```
//!
//! Because `E[1/r] = k/(k-1)`, every retarget interval runs slightly longer
//! than its target. Because `r_i` appears in the numerator of `t_i` and the
//! denominator of `t_{i+1}`, adjacent intervals are negatively correlated and
//! the variance added by each extra interval is tiny compared with the
//! constant-difficulty model.
//!
//! The model is unconditional: `r_0`, the ratio of the interval before the
//! first one counted, is treated as random even though in practice it has
//! already been observed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::BlockHeight;
use crate::units::Duration;

/// Blocks per retarget interval on Bitcoin.
pub const BITCOIN_RETARGET_INTERVAL: u32 = 2016;

/// Numerator constant of the first-plus-last-interval variance approximation
/// for a 2016-block, 10-minute schedule.
pub const SIMPLIFIED_FIRST_INTERVAL_CONSTANT: f64 = 8_133_000.0;

/// Retarget schedule: `k` blocks per interval, `block_target` per block.
/// The interval target is always `k * block_target`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetargetParams {
    k: u32,
    block_target: Duration,
}

impl RetargetParams {
    /// `k >= 2` and a positive block target. Operations that need
    /// inverse-square moments additionally require `k >= 3`.
    pub fn new(k: u32, block_target: Duration) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid(format!("retarget interval must be at least 2 blocks, got {k}")));
        }
        if !(block_target.minutes() > 0.0 && block_target.minutes().is_finite()) {
            return Err(Error::invalid(format!(
                "block target must be positive, got {} min",
                block_target.minutes()
            )));
        }
        Ok(RetargetParams { k, block_target })
    }

    /// `k` blocks at the 10 minute target.
    pub fn with_k(k: u32) -> Result<Self> {
        Self::new(k, crate::naive::BLOCK_INTERVAL)
    }

    pub fn bitcoin() -> Self {
        RetargetParams {
            k: BITCOIN_RETARGET_INTERVAL,
            block_target: crate::naive::BLOCK_INTERVAL,
        }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn block_target(&self) -> Duration {
        self.block_target
    }

    pub fn retarget_target(&self) -> Duration {
        self.block_target * self.k as f64
    }

    pub fn drift_factor(&self) -> f64 {
        schedule_drift_factor(self)
    }

    pub(crate) fn require_variance_defined(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::invalid(format!(
                "variance needs a retarget interval of at least 3 blocks, got {}",
                self.k
            )));
        }
        Ok(())
    }
}

impl Default for RetargetParams {
    fn default() -> Self {
        Self::bitcoin()
    }
}

/// Where the halving falls relative to retarget boundaries: `m` blocks into
/// interval `n`, counting the current interval as 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RetargetPosition {
    n: u32,
    m: u32,
}

impl RetargetPosition {
    /// `m = 0` is read as "exactly at the boundary closing interval `n-1`" and
    /// normalized to `(n - 1, k)`.
    pub fn new(n: u32, m: u32, params: &RetargetParams) -> Result<Self> {
        let (n, m) = if m == 0 { (n.saturating_sub(1), params.k) } else { (n, m) };
        if n < 1 {
            return Err(Error::invalid("halving must fall in interval 1 or later"));
        }
        if m > params.k {
            return Err(Error::invalid(format!(
                "halving offset {m} exceeds the retarget interval of {} blocks",
                params.k
            )));
        }
        Ok(RetargetPosition { n, m })
    }

    /// Position for `blocks` remaining blocks assuming the count starts on a
    /// retarget boundary.
    pub fn from_blocks_remaining(blocks: u64, params: &RetargetParams) -> Result<Self> {
        if blocks == 0 {
            return Err(Error::invalid("no blocks remaining"));
        }
        let k = params.k as u64;
        let n = blocks.div_ceil(k);
        let m = blocks - (n - 1) * k;
        let n = u32::try_from(n).map_err(|_| Error::invalid("too many retarget intervals"))?;
        Self::new(n, m as u32, params)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Blocks from the start of interval 1 to the halving.
    pub fn blocks(&self, params: &RetargetParams) -> u64 {
        (self.n as u64 - 1) * params.k as u64 + self.m as u64
    }
}

/// Moments of `r ~ Erlang(shape, rate)` used by the retarget model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErlangMoments {
    pub mean: f64,
    /// `E[1/r]`
    pub mean_inv: f64,
    /// `E[r^2]`
    pub second: f64,
    /// `E[1/r^2]`
    pub second_inv: f64,
    pub variance: f64,
}

/// Closed-form Erlang moments. The inverse-square moment is finite only for
/// `shape >= 3`, so smaller shapes are rejected.
pub fn erlang_moments(shape: u32, rate: f64) -> Result<ErlangMoments> {
    if shape < 3 {
        return Err(Error::invalid(format!(
            "E[1/r^2] of an Erlang variable needs shape >= 3, got {shape}"
        )));
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::invalid(format!("Erlang rate must be positive, got {rate}")));
    }
    let a = shape as f64;
    Ok(ErlangMoments {
        mean: a / rate,
        mean_inv: rate / (a - 1.0),
        second: a * (a + 1.0) / (rate * rate),
        second_inv: rate * rate / ((a - 1.0) * (a - 2.0)),
        variance: a / (rate * rate),
    })
}

/// `k/(k-1)`: how much longer than its target each retarget interval runs
/// on average.
pub fn schedule_drift_factor(params: &RetargetParams) -> f64 {
    let k = params.k as f64;
    k / (k - 1.0)
}

/// Coefficient of `Cov(r_i/r_{i-1}, r_{i+1}/r_i)` in the variance of `T`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMode {
    /// `-k/(k+1)^2`, with the last-interval cross term not scaled by `M`.
    /// Gives a marginal variance of about 1100 min^2 at `k = 2016`.
    PaperPrinted,
    /// `k/(k-1) - (k/(k-1))^2 = -k/(k-1)^2`, with the last-interval cross
    /// term scaled by `M`. Agrees with simulation.
    #[default]
    Derived,
}

impl CovarianceMode {
    pub fn coefficient(self, k: u32) -> f64 {
        let k = k as f64;
        match self {
            CovarianceMode::PaperPrinted => -k / ((k + 1.0) * (k + 1.0)),
            CovarianceMode::Derived => -k / ((k - 1.0) * (k - 1.0)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CovarianceMode::PaperPrinted => "paper",
            CovarianceMode::Derived => "derived",
        }
    }
}

impl fmt::Display for CovarianceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CovarianceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" | "paper_printed" | "printed" => Ok(CovarianceMode::PaperPrinted),
            "derived" => Ok(CovarianceMode::Derived),
            other => Err(Error::invalid(format!(
                "unknown covariance mode {other:?} (expected paper or derived)"
            ))),
        }
    }
}

/// `E[T] = k/(k-1) * ((n-1) * target + M * block_target)`.
pub fn retarget_eta(pos: RetargetPosition, params: &RetargetParams) -> Result<Duration> {
    params.require_variance_defined()?;
    let nominal = params.retarget_target() * (pos.n - 1) as f64 + params.block_target * pos.m as f64;
    Ok(nominal * schedule_drift_factor(params))
}

/// `V[r_i / r_{i-1}]` for two independent `Erlang(k, k)` ratios.
fn full_ratio_variance(k: f64) -> f64 {
    k * (2.0 * k - 1.0) / ((k - 2.0) * (k - 1.0) * (k - 1.0))
}

/// Variance of the time to the halving, in minutes squared.
///
/// ```text
/// V[T] = W^2 [ (n-1) V_full + 2 (n-2) C ] + 2 W B X C + B^2 M k^2 (k+M-1) / ((k-2)(k-1)^2)
/// ```
///
/// with `W` the interval target, `B` the block target, `C` the covariance
/// coefficient of `mode`, and `X = M` in derived mode or `1` in printed mode.
/// For `n = 1` there is no earlier interval inside `T`: the `(n-1)` term
/// vanishes, the `(n-2)` count clamps to zero and the cross term is dropped.
pub fn retarget_variance(pos: RetargetPosition, params: &RetargetParams, mode: CovarianceMode) -> Result<f64> {
    params.require_variance_defined()?;
    let k = params.k as f64;
    let m = pos.m as f64;
    let w = params.retarget_target().minutes();
    let b = params.block_target.minutes();
    let c = mode.coefficient(params.k);

    let full_intervals = (pos.n - 1) as f64;
    let adjacent_full_pairs = pos.n.saturating_sub(2) as f64;
    let body = w * w * (full_intervals * full_ratio_variance(k) + 2.0 * adjacent_full_pairs * c);

    let cross = if pos.n >= 2 {
        let scale = match mode {
            CovarianceMode::Derived => m,
            CovarianceMode::PaperPrinted => 1.0,
        };
        2.0 * w * b * scale * c
    } else {
        0.0
    };

    let last = b * b * m * k * k * (k + m - 1.0) / ((k - 2.0) * (k - 1.0) * (k - 1.0));
    Ok(body + cross + last)
}

/// Variance added per extra retarget interval, `dV[T]/dn`.
///
/// Derived mode gives `W^2 * 3k / ((k-2)(k-1)^2)`; printed mode gives
/// `W^2 * k (3 + k (11k - 10)) / ((k-2)(k^2-1)^2)`.
pub fn marginal_variance_per_interval(params: &RetargetParams, mode: CovarianceMode) -> Result<f64> {
    params.require_variance_defined()?;
    let w = params.retarget_target().minutes();
    Ok(w * w * (full_ratio_variance(params.k as f64) + 2.0 * mode.coefficient(params.k)))
}

/// Approximation keeping only the first and last intervals:
/// `B^2 * (M + M^2/k + 8133000/k)`.
pub fn simplified_variance(m: u32, params: &RetargetParams) -> Result<f64> {
    if m < 1 || m > params.k {
        return Err(Error::invalid(format!(
            "halving offset must lie in [1, {}], got {m}",
            params.k
        )));
    }
    let k = params.k as f64;
    let m = m as f64;
    let b = params.block_target.minutes();
    Ok(b * b * (m + m * m / k + SIMPLIFIED_FIRST_INTERVAL_CONSTANT / k))
}

/// Locates `halving` relative to the retarget boundaries, counting the
/// interval containing `current` as interval 1.
///
/// When `current` is not itself on a boundary the partially elapsed interval
/// is still treated as a whole interval 1, which overstates the time left in
/// it; the model has no notion of a partly mined interval.
pub fn position_from_heights(
    current: BlockHeight,
    halving: BlockHeight,
    params: &RetargetParams,
) -> Result<RetargetPosition> {
    if current >= halving {
        return Err(Error::invalid(format!(
            "current height {current} must be below the halving height {halving}"
        )));
    }
    let k = params.k as u64;
    let (h, c) = (halving.get(), current.get());
    let mut final_start = h / k * k;
    let mut m = h - final_start;
    if m == 0 {
        m = k;
        final_start -= k;
    }
    let current_start = c / k * k;
    let n = if current_start >= final_start {
        1
    } else {
        (final_start - current_start) / k + 1
    };
    let n = u32::try_from(n).map_err(|_| Error::invalid("too many retarget intervals"))?;
    RetargetPosition::new(n, m as u32, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(k: u32) -> RetargetParams {
        RetargetParams::with_k(k).unwrap()
    }

    fn pos(n: u32, m: u32, p: &RetargetParams) -> RetargetPosition {
        RetargetPosition::new(n, m, p).unwrap()
    }

    /// `E[r^p]` for `r ~ Erlang(shape, rate)` by Simpson quadrature of the
    /// density on a log-spaced grid. Independent of the closed forms.
    fn erlang_moment_quadrature(shape: u32, rate: f64, power: i32) -> f64 {
        let a = shape as f64;
        let ln_norm = a * rate.ln() - (1..shape).map(|i| (i as f64).ln()).sum::<f64>();
        // substitute r = e^u, dr = e^u du
        let integrand = |u: f64| {
            let r = u.exp();
            (ln_norm + (a - 1.0 + power as f64 + 1.0) * u - rate * r).exp()
        };
        let (lo, hi, steps) = (-40.0f64, 6.0f64 + (a / rate).ln().max(0.0) + 4.0, 200_000);
        let h = (hi - lo) / steps as f64;
        let mut acc = integrand(lo) + integrand(hi);
        for i in 1..steps {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * integrand(lo + i as f64 * h);
        }
        acc * h / 3.0
    }

    /// V[T] assembled from the full covariance matrix of (t_1..t_n), with
    /// every E[t_i t_j] factored into numerically integrated moments of the
    /// independent r_l.
    fn variance_by_covariance_matrix(k: u32, n: u32, m: u32, block: f64) -> f64 {
        let w = k as f64 * block;
        let kf = k as f64;
        // t_i = coef_i * r_i^1 * r_{i-1}^-1 ; r_0..r_{n-1} ~ Erlang(k,k), r_n ~ Erlang(m,m)
        let coef = |i: u32| if i < n { w } else { m as f64 * block };
        let dist = |l: u32| if l == n { (m, m as f64) } else { (k, kf) };
        let moment = |l: u32, p: i32| {
            if p == 0 {
                1.0
            } else {
                let (s, r) = dist(l);
                erlang_moment_quadrature(s, r, p)
            }
        };
        let exponents = |i: u32| {
            let mut e = vec![0i32; n as usize + 1];
            e[i as usize] += 1;
            e[i as usize - 1] -= 1;
            e
        };
        let expect = |e: &[i32]| e.iter().enumerate().map(|(l, &p)| moment(l as u32, p)).product::<f64>();
        let mut var = 0.0;
        for i in 1..=n {
            for j in 1..=n {
                let (ei, ej) = (exponents(i), exponents(j));
                let joint: Vec<i32> = ei.iter().zip(&ej).map(|(a, b)| a + b).collect();
                var += coef(i) * coef(j) * (expect(&joint) - expect(&ei) * expect(&ej));
            }
        }
        var
    }

    #[test]
    fn erlang_moments_match_quadrature() {
        for (shape, rate) in [(3u32, 3.0), (10, 10.0), (100, 100.0), (7, 0.5)] {
            let m = erlang_moments(shape, rate).unwrap();
            let q = |p| erlang_moment_quadrature(shape, rate, p);
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-7 * b.abs();
            assert!(close(m.mean, q(1)));
            assert!(close(m.mean_inv, q(-1)));
            assert!(close(m.second, q(2)));
            assert!(close(m.second_inv, q(-2)));
            assert!(close(m.variance, q(2) - q(1) * q(1)));
        }
    }

    #[test]
    fn erlang_moment_examples() {
        let m = erlang_moments(2016, 2016.0).unwrap();
        assert_eq!(m.mean_inv, 2016.0 / 2015.0);
        let m10 = erlang_moments(10, 10.0).unwrap();
        assert!((m10.variance - 0.1).abs() < 1e-15);
        assert!((m10.second_inv - 100.0 / 72.0).abs() < 1e-15);
        assert!((m10.second - 1.1).abs() < 1e-15);
        assert!(erlang_moments(2, 2.0).is_err());
        assert!(erlang_moments(5, 0.0).is_err());
    }

    #[test]
    fn drift_factor() {
        assert_eq!(schedule_drift_factor(&RetargetParams::bitcoin()), 2016.0 / 2015.0);
        assert_eq!(schedule_drift_factor(&params(2)), 2.0);
        assert!((schedule_drift_factor(&params(10)) - 10.0 / 9.0).abs() < 1e-15);
        assert!(RetargetParams::with_k(1).is_err());
    }

    #[test]
    fn eta_examples() {
        let p = RetargetParams::bitcoin();
        let eta = retarget_eta(pos(1, 672, &p), &p).unwrap();
        assert!((eta.minutes() - 2016.0 / 2015.0 * 6720.0).abs() < 1e-9);
        assert!((eta.minutes() - 6723.335).abs() < 1e-3);
        let boundary = retarget_eta(pos(1, 2016, &p), &p).unwrap();
        assert_eq!(boundary.minutes(), 2016.0 / 2015.0 * 20160.0);
        let two = retarget_eta(pos(2, 2016, &p), &p).unwrap();
        assert!((two.minutes() - 2016.0 / 2015.0 * 40320.0).abs() < 1e-9);
        assert!(retarget_eta(pos(1, 1, &params(2)), &params(2)).is_err());
    }

    #[test]
    fn derived_variance_matches_covariance_matrix() {
        for &(k, n, m) in &[(10u32, 3u32, 10u32), (5, 2, 1), (5, 5, 2), (50, 3, 25), (10, 1, 4), (4, 4, 4)] {
            let p = params(k);
            let analytic = retarget_variance(pos(n, m, &p), &p, CovarianceMode::Derived).unwrap();
            let oracle = variance_by_covariance_matrix(k, n, m, 10.0);
            assert!(
                (analytic - oracle).abs() <= 1e-6 * oracle,
                "k={k} n={n} m={m}: {analytic} vs {oracle}"
            );
        }
    }

    #[test]
    fn printed_mode_matches_expanded_expression() {
        // (2wk)^2 (k(2k-1)(n-1)/((k-2)(k-1)^2) - 2(n-2)k/(k+1)^2)
        //   - (2wk*10min) 2k/(k+1)^2 + (10min)^2 M k^2(k+M-1)/((k-2)(k-1)^2)
        let (k, n, m) = (2016.0f64, 7.0f64, 672.0f64);
        let w = 20160.0;
        let printed = w * w * (k * (2.0 * k - 1.0) * (n - 1.0) / ((k - 2.0) * (k - 1.0).powi(2))
            - 2.0 * (n - 2.0) * k / (k + 1.0).powi(2))
            - w * 10.0 * 2.0 * k / (k + 1.0).powi(2)
            + 100.0 * m * k * k * (k + m - 1.0) / ((k - 2.0) * (k - 1.0).powi(2));
        let p = RetargetParams::bitcoin();
        let got = retarget_variance(pos(7, 672, &p), &p, CovarianceMode::PaperPrinted).unwrap();
        assert!((got - printed).abs() <= 1e-9 * printed);
    }

    #[test]
    fn marginal_variance() {
        let p = RetargetParams::bitcoin();
        let printed = marginal_variance_per_interval(&p, CovarianceMode::PaperPrinted).unwrap();
        assert!((printed - 1100.0).abs() / 1100.0 < 0.01, "{printed}");
        let k = 2016.0f64;
        let expanded = 20160.0f64.powi(2) * k * (3.0 + k * (11.0 * k - 10.0)) / ((k - 2.0) * (k * k - 1.0).powi(2));
        assert!((printed - expanded).abs() <= 1e-9 * expanded);

        let derived = marginal_variance_per_interval(&p, CovarianceMode::Derived).unwrap();
        let closed = 20160.0f64.powi(2) * 3.0 * k / ((k - 2.0) * (k - 1.0).powi(2));
        assert!((derived - closed).abs() <= 1e-9 * closed);
        assert!((derived - 300.6).abs() < 0.5, "{derived}");
        assert!(201_600.0 / printed >= 180.0);
        assert!(201_600.0 / derived >= 180.0);
    }

    #[test]
    fn marginal_is_a_finite_difference() {
        for mode in [CovarianceMode::Derived, CovarianceMode::PaperPrinted] {
            let p = params(10);
            let v = |n| retarget_variance(pos(n, 5, &p), &p, mode).unwrap();
            let slope = marginal_variance_per_interval(&p, mode).unwrap();
            assert!((v(4) - v(3) - slope).abs() < 1e-9 * slope.abs().max(1.0));
            assert!((v(9) - v(8) - slope).abs() < 1e-9 * slope.abs().max(1.0));
        }
    }

    #[test]
    fn simplified_variance_examples() {
        let p = RetargetParams::bitcoin();
        let v = simplified_variance(672, &p).unwrap();
        assert!((v - 493_022.6).abs() < 0.1, "{v}");
        assert!((v - 493_000.0).abs() / 493_000.0 < 0.005);
        assert!((v.sqrt() - 702.0).abs() < 1.0);
        let one = simplified_variance(1, &p).unwrap();
        assert!((one - 100.0 * (1.0 + 1.0 / 2016.0 + 8_133_000.0 / 2016.0)).abs() < 1e-9);
        assert!((one - 403_520.0).abs() < 5.0);
        let full = simplified_variance(2016, &p).unwrap();
        assert!((full - 806_622.6).abs() < 0.1, "{full}");
        assert!(simplified_variance(0, &p).is_err());
        assert!(simplified_variance(2017, &p).is_err());
    }

    #[test]
    fn positions_from_heights() {
        let p = RetargetParams::bitcoin();
        let h = BlockHeight(420_000);
        assert_eq!(position_from_heights(BlockHeight(419_328), h, &p).unwrap(), pos(1, 672, &p));
        assert_eq!(position_from_heights(BlockHeight(417_312), h, &p).unwrap(), pos(2, 672, &p));
        assert_eq!(position_from_heights(BlockHeight(419_999), h, &p).unwrap(), pos(1, 672, &p));
        assert_eq!(position_from_heights(BlockHeight(414_524), h, &p).unwrap().n(), 4);
        assert!(position_from_heights(h, h, &p).is_err());
        assert!(position_from_heights(BlockHeight(420_001), h, &p).is_err());
    }

    #[test]
    fn boundary_halving_normalizes() {
        let p = params(10);
        assert_eq!(pos(3, 0, &p), pos(2, 10, &p));
        assert!(RetargetPosition::new(1, 0, &p).is_err());
        assert!(RetargetPosition::new(1, 11, &p).is_err());
        assert!(RetargetPosition::new(0, 3, &p).is_err());
        assert_eq!(position_from_heights(BlockHeight(5), BlockHeight(40), &p).unwrap(), pos(4, 10, &p));
        assert_eq!(position_from_heights(BlockHeight(35), BlockHeight(40), &p).unwrap(), pos(1, 10, &p));
    }

    #[test]
    fn position_from_remaining_blocks() {
        let p = RetargetParams::bitcoin();
        assert_eq!(RetargetPosition::from_blocks_remaining(672, &p).unwrap(), pos(1, 672, &p));
        assert_eq!(RetargetPosition::from_blocks_remaining(2016, &p).unwrap(), pos(1, 2016, &p));
        assert_eq!(RetargetPosition::from_blocks_remaining(2017, &p).unwrap(), pos(2, 1, &p));
        assert!(RetargetPosition::from_blocks_remaining(0, &p).is_err());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("paper".parse::<CovarianceMode>().unwrap(), CovarianceMode::PaperPrinted);
        assert_eq!("derived".parse::<CovarianceMode>().unwrap(), CovarianceMode::Derived);
        assert!("other".parse::<CovarianceMode>().is_err());
        assert_eq!(CovarianceMode::default(), CovarianceMode::Derived);
    }

    proptest! {
        #[test]
        fn eta_is_drift_times_nominal(k in 3u32..5000, n in 1u32..500, m_frac in 0.0f64..1.0) {
            let p = params(k);
            let m = 1 + ((k - 1) as f64 * m_frac) as u32;
            let position = pos(n, m, &p);
            let eta = retarget_eta(position, &p).unwrap().minutes();
            let nominal = (n - 1) as f64 * p.retarget_target().minutes() + m as f64 * 10.0;
            prop_assert!((eta / nominal - k as f64 / (k as f64 - 1.0)).abs() < 1e-12);
            prop_assert!(eta > crate::naive::naive_eta(position.blocks(&p)).minutes());
        }

        #[test]
        fn variance_positive_and_increasing(k in 3u32..5000, n in 1u32..200, m_frac in 0.0f64..1.0) {
            let p = params(k);
            let m = 1 + ((k - 1) as f64 * m_frac) as u32;
            for mode in [CovarianceMode::Derived, CovarianceMode::PaperPrinted] {
                let here = retarget_variance(pos(n, m, &p), &p, mode).unwrap();
                let next = retarget_variance(pos(n + 1, m, &p), &p, mode).unwrap();
                prop_assert!(here > 0.0);
                prop_assert!(next > here);
            }
        }
    }
}
