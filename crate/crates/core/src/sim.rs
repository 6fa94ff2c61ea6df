//! Seeded Monte Carlo simulation of block arrivals and difficulty retargets.
//!
//! Every trial covers interval 0, which only sets the difficulty of
//! interval 1, followed by intervals `1..=n`; the halving lands `M` blocks
//! into interval `n`. Two granularities generate the same process along
//! different routes:
//!
//! * [`Granularity::PerBlock`] draws every block time as an exponential with
//!   rate `H / (2^32 D)` and applies `D <- D * target / t` after each full
//!   interval.
//! * [`Granularity::PerInterval`] draws the ratios `r_i ~ Erlang(k, k)`
//!   (`Erlang(M, M)` for the last interval) and applies the closed recurrence
//!   `t_i = (r_i / r_{i-1}) * target`.
//!
//! Trial `i` always draws from ChaCha stream `i` of the master seed and the
//! results are reduced in trial order, so a configuration produces the same
//! summary bit for bit on any number of threads.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashrate::Hashrate;
use crate::ingest::{ChainSnapshot, HeaderRecord};
use crate::retarget::{CovarianceMode, RetargetParams, RetargetPosition};
use crate::schedule::BlockHeight;
use crate::stats::{SampleCovariance, SampleMoments};
use crate::units::{Duration, Timestamp};

/// Expected hashes per block at difficulty 1.
pub const HASHES_PER_DIFFICULTY: f64 = 4_294_967_296.0;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 2016;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    PerBlock,
    #[default]
    PerInterval,
}

impl std::str::FromStr for Granularity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_block" | "per-block" | "block" => Ok(Granularity::PerBlock),
            "per_interval" | "per-interval" | "interval" => Ok(Granularity::PerInterval),
            other => Err(Error::invalid(format!(
                "unknown granularity {other:?} (expected per_block or per_interval)"
            ))),
        }
    }
}

/// Hashrate multiplied by `factor` from the start of interval `interval`
/// (1-based) onwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HashrateStep {
    pub interval: u32,
    pub factor: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub params: RetargetParams,
    pub n: u32,
    pub m: u32,
    pub hashrate: Hashrate,
    pub initial_difficulty: f64,
    pub trials: u64,
    pub seed: u64,
    pub granularity: Granularity,
    /// When false the difficulty stays at `initial_difficulty` throughout.
    pub retarget: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hashrate_step: Option<HashrateStep>,
}

impl SimulationConfig {
    /// Defaults: difficulty 1 at its equilibrium hashrate, 100 000 trials,
    /// [`DEFAULT_SEED`], per-interval sampling, retargeting on.
    pub fn new(params: RetargetParams, position: RetargetPosition) -> Self {
        SimulationConfig {
            params,
            n: position.n(),
            m: position.m(),
            hashrate: Hashrate::equilibrium(1.0, params.block_target())
                .expect("positive block target gives a positive hashrate"),
            initial_difficulty: 1.0,
            trials: 100_000,
            seed: DEFAULT_SEED,
            granularity: Granularity::PerInterval,
            retarget: true,
            hashrate_step: None,
        }
    }

    pub fn trials(mut self, trials: u64) -> Self {
        self.trials = trials;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn granularity(mut self, granularity: Granularity) -> Self {
        self.granularity = granularity;
        self
    }

    pub fn retarget(mut self, enabled: bool) -> Self {
        self.retarget = enabled;
        self
    }

    pub fn hashrate(mut self, hashrate: Hashrate) -> Self {
        self.hashrate = hashrate;
        self
    }

    pub fn initial_difficulty(mut self, difficulty: f64) -> Self {
        self.initial_difficulty = difficulty;
        self
    }

    pub fn hashrate_step(mut self, step: HashrateStep) -> Self {
        self.hashrate_step = Some(step);
        self
    }

    pub fn position(&self) -> Result<RetargetPosition> {
        RetargetPosition::new(self.n, self.m, &self.params)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.require_variance_defined()?;
        if self.n < 1 || self.m < 1 || self.m > self.params.k() {
            return Err(Error::invalid(format!(
                "need n >= 1 and 1 <= M <= {}, got n={} M={}",
                self.params.k(),
                self.n,
                self.m
            )));
        }
        if self.trials < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 trials to estimate a variance, got {}",
                self.trials
            )));
        }
        if !(self.initial_difficulty > 0.0 && self.initial_difficulty.is_finite()) {
            return Err(Error::invalid(format!(
                "initial difficulty must be positive, got {}",
                self.initial_difficulty
            )));
        }
        if let Some(step) = self.hashrate_step {
            if !(step.factor > 0.0 && step.factor.is_finite()) || step.interval < 1 {
                return Err(Error::invalid(format!(
                    "hashrate step needs a positive factor and interval >= 1, got {step:?}"
                )));
            }
        }
        Ok(())
    }

    /// Mean time per block at the initial difficulty, `2^32 D / H`.
    fn initial_block_time(&self) -> f64 {
        HASHES_PER_DIFFICULTY * self.initial_difficulty / self.hashrate.per_minute()
    }

    fn hashrate_factor(&self, interval: u32) -> f64 {
        match self.hashrate_step {
            Some(step) if interval >= step.interval => step.factor,
            _ => 1.0,
        }
    }

    fn blocks_in(&self, interval: u32) -> u32 {
        if interval == self.n {
            self.m
        } else {
            self.params.k()
        }
    }
}

/// One retarget interval of one trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimulatedInterval {
    /// Expected duration given the difficulty and hashrate in force.
    pub s: Duration,
    /// Actual duration.
    pub t: Duration,
    /// `t / s`.
    pub r: f64,
    pub difficulty: f64,
}

/// Empirical moments of the time to the halving.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub mean_t: Duration,
    /// Minutes squared.
    pub var_t: f64,
    pub se_mean: Duration,
    pub se_var: f64,
    /// Sample covariance of `(t_1, t_2)` in units of the interval target;
    /// present when `n >= 3`, so that both intervals are full.
    pub cov_adjacent: Option<f64>,
    pub cov_adjacent_se: Option<f64>,
    pub trials: u64,
}

impl SimulationSummary {
    fn from_totals(totals: &[f64], cov: Option<SampleCovariance>) -> Result<Self> {
        let m = SampleMoments::from_slice(totals)?;
        Ok(SimulationSummary {
            mean_t: Duration::from_minutes(m.mean),
            var_t: m.variance,
            se_mean: Duration::from_minutes(m.se_mean),
            se_var: m.se_variance,
            cov_adjacent: cov.map(|c| c.covariance),
            cov_adjacent_se: cov.map(|c| c.se),
            trials: totals.len() as u64,
        })
    }

    pub fn mean_z(&self, expected: Duration) -> f64 {
        (self.mean_t - expected).minutes() / self.se_mean.minutes()
    }

    pub fn var_z(&self, expected: f64) -> f64 {
        (self.var_t - expected) / self.se_var
    }
}

struct Samplers {
    full: Gamma<f64>,
    last: Gamma<f64>,
}

impl Samplers {
    fn new(config: &SimulationConfig) -> Result<Self> {
        let gamma = |shape: u32| {
            Gamma::new(shape as f64, 1.0 / shape as f64)
                .map_err(|e| Error::invalid(format!("Erlang({shape}, {shape}): {e}")))
        };
        Ok(Samplers {
            full: gamma(config.params.k())?,
            last: gamma(config.m)?,
        })
    }
}

fn master_key(seed: u64) -> <ChaCha8Rng as SeedableRng>::Seed {
    ChaCha8Rng::seed_from_u64(seed).get_seed()
}

fn trial_rng(key: <ChaCha8Rng as SeedableRng>::Seed, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial);
    rng
}

fn exponential_sum<R: Rng + ?Sized>(rng: &mut R, count: u32, mean: f64) -> f64 {
    let mut total = 0.0f64;
    for _ in 0..count {
        let x: f64 = Exp1.sample(rng);
        total += x;
    }
    total * mean
}

fn simulate_per_block<R: Rng + ?Sized>(config: &SimulationConfig, rng: &mut R, out: &mut Vec<SimulatedInterval>) {
    let k = config.params.k();
    let target = config.params.retarget_target().minutes();
    let hashrate = config.hashrate.per_minute();
    let mut difficulty = config.initial_difficulty;

    if config.retarget {
        let t0 = exponential_sum(rng, k, config.initial_block_time());
        difficulty *= target / t0;
    }
    for i in 1..=config.n {
        let blocks = config.blocks_in(i);
        let rate = hashrate * config.hashrate_factor(i) / (HASHES_PER_DIFFICULTY * difficulty);
        let t = exponential_sum(rng, blocks, 1.0 / rate);
        let s = blocks as f64 / rate;
        out.push(SimulatedInterval {
            s: Duration::from_minutes(s),
            t: Duration::from_minutes(t),
            r: t / s,
            difficulty,
        });
        if config.retarget {
            difficulty *= target / t;
        }
    }
}

fn simulate_per_interval<R: Rng + ?Sized>(
    config: &SimulationConfig,
    samplers: &Samplers,
    rng: &mut R,
    out: &mut Vec<SimulatedInterval>,
) {
    let k = config.params.k() as f64;
    let block = config.params.block_target().minutes();
    let target = config.params.retarget_target().minutes();
    let hashrate = config.hashrate.per_minute();
    let mut r_prev = if config.retarget { samplers.full.sample(rng) } else { 1.0 };

    for i in 1..=config.n {
        let blocks = config.blocks_in(i) as f64;
        let r = if i == config.n { samplers.last.sample(rng) } else { samplers.full.sample(rng) };
        let h_now = config.hashrate_factor(i);
        let (s, difficulty) = if config.retarget {
            // s_i = blocks * (target / k) * (H_{i-1} / H_i) / r_{i-1}
            let h_prev = config.hashrate_factor(i - 1);
            let s = blocks * block * (h_prev / h_now) / r_prev;
            let difficulty = target * hashrate * h_prev / (HASHES_PER_DIFFICULTY * k * r_prev);
            (s, difficulty)
        } else {
            (blocks * config.initial_block_time() / h_now, config.initial_difficulty)
        };
        out.push(SimulatedInterval {
            s: Duration::from_minutes(s),
            t: Duration::from_minutes(r * s),
            r,
            difficulty,
        });
        r_prev = r;
    }
}

fn simulate_into(
    config: &SimulationConfig,
    samplers: &Samplers,
    key: <ChaCha8Rng as SeedableRng>::Seed,
    trial: u64,
    out: &mut Vec<SimulatedInterval>,
) {
    out.clear();
    let mut rng = trial_rng(key, trial);
    match config.granularity {
        Granularity::PerBlock => simulate_per_block(config, &mut rng, out),
        Granularity::PerInterval => simulate_per_interval(config, samplers, &mut rng, out),
    }
}

/// Intervals `1..=n` of a single trial.
pub fn simulate_trial(config: &SimulationConfig, trial: u64) -> Result<Vec<SimulatedInterval>> {
    config.validate()?;
    let samplers = Samplers::new(config)?;
    let mut out = Vec::with_capacity(config.n as usize);
    simulate_into(config, &samplers, master_key(config.seed), trial, &mut out);
    Ok(out)
}

/// Runs every trial and maps its intervals through `extract`, in trial order.
pub fn map_trials<T, F>(config: &SimulationConfig, extract: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[SimulatedInterval]) -> T + Sync,
{
    config.validate()?;
    let samplers = Samplers::new(config)?;
    let key = master_key(config.seed);
    Ok((0..config.trials)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(config.n as usize),
            |buf, trial| {
                simulate_into(config, &samplers, key, trial, buf);
                extract(buf)
            },
        )
        .collect())
}

fn total_time(intervals: &[SimulatedInterval]) -> f64 {
    intervals.iter().map(|iv| iv.t.minutes()).sum()
}

/// Per-trial times to the halving, in minutes.
pub fn simulate_totals(config: &SimulationConfig) -> Result<Vec<f64>> {
    map_trials(config, total_time)
}

pub fn run(config: &SimulationConfig) -> Result<SimulationSummary> {
    run_with_totals(config).map(|(summary, _)| summary)
}

/// Like [`run`], also returning the per-trial totals.
pub fn run_with_totals(config: &SimulationConfig) -> Result<(SimulationSummary, Vec<f64>)> {
    let target = config.params.retarget_target().minutes();
    let outcomes = map_trials(config, |iv| {
        let pair = (iv.len() >= 3).then(|| (iv[0].t.minutes() / target, iv[1].t.minutes() / target));
        (total_time(iv), pair)
    })?;
    let totals: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let pairs: Option<Vec<(f64, f64)>> = outcomes.iter().map(|o| o.1).collect();
    let cov = pairs.map(|p| SampleCovariance::from_pairs(&p)).transpose()?;
    Ok((SimulationSummary::from_totals(&totals, cov)?, totals))
}

/// Writes one total per line, in minutes, at full precision.
pub fn write_raw_totals<W: Write>(mut out: W, totals: &[f64]) -> io::Result<()> {
    for t in totals {
        writeln!(out, "{t}")?;
    }
    out.flush()
}

/// Sample covariance of `t_i / target` and `t_{i+lag} / target`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CovarianceEstimate {
    pub lag: u32,
    pub covariance: f64,
    pub se: f64,
    pub pairs: u64,
}

impl CovarianceEstimate {
    pub fn z(&self, expected: f64) -> f64 {
        (self.covariance - expected) / self.se
    }

    /// Compares the estimate against both covariance coefficients.
    pub fn adjudicate(&self, k: u32) -> CovarianceVerdict {
        let derived_z = self.z(CovarianceMode::Derived.coefficient(k));
        let printed_z = self.z(CovarianceMode::PaperPrinted.coefficient(k));
        let selected = if derived_z.abs() <= 3.0 && printed_z.abs() >= 10.0 {
            Some(CovarianceMode::Derived)
        } else if printed_z.abs() <= 3.0 && derived_z.abs() >= 10.0 {
            Some(CovarianceMode::PaperPrinted)
        } else {
            None
        };
        CovarianceVerdict {
            derived_z,
            printed_z,
            selected,
        }
    }
}

/// Which covariance coefficient a simulation supports: the selected mode lies
/// within 3 standard errors and the other at least 10 away.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CovarianceVerdict {
    pub derived_z: f64,
    pub printed_z: f64,
    pub selected: Option<CovarianceMode>,
}

/// Covariance of the first two full intervals, one pair per trial.
pub fn estimate_covariance(config: &SimulationConfig) -> Result<CovarianceEstimate> {
    estimate_covariance_at_lag(config, 1)
}

/// Covariance of full intervals 1 and `1 + lag`, one pair per trial.
pub fn estimate_covariance_at_lag(config: &SimulationConfig, lag: u32) -> Result<CovarianceEstimate> {
    if lag < 1 || config.n < lag + 2 {
        return Err(Error::invalid(format!(
            "lag {lag} covariance of full intervals needs n >= {}, got {}",
            lag.max(1) + 2,
            config.n
        )));
    }
    let target = config.params.retarget_target().minutes();
    let pairs = map_trials(config, |iv| {
        (iv[0].t.minutes() / target, iv[lag as usize].t.minutes() / target)
    })?;
    let c = SampleCovariance::from_pairs(&pairs)?;
    Ok(CovarianceEstimate {
        lag,
        covariance: c.covariance,
        se: c.se,
        pairs: c.count as u64,
    })
}

/// `count` exact `Erlang(shape, rate)` draws.
pub fn sample_erlang(shape: u32, rate: f64, count: usize, seed: u64) -> Result<Vec<f64>> {
    if shape < 1 || !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::invalid(format!(
            "Erlang needs shape >= 1 and a positive rate, got shape={shape} rate={rate}"
        )));
    }
    let gamma = Gamma::new(shape as f64, 1.0 / rate).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| gamma.sample(&mut rng)).collect())
}

/// A synthetic header chain mined at a fixed hashrate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainSimConfig {
    pub params: RetargetParams,
    pub start_height: u64,
    pub start_time: Timestamp,
    pub blocks: usize,
    pub hashrate: Hashrate,
    pub initial_difficulty: f64,
    pub retarget: bool,
    pub seed: u64,
}

/// Mines `blocks` headers starting at `start_height`, block by block, with
/// timestamps rounded to whole seconds. Retargets happen at heights that
/// are multiples of `k` once a whole interval has been observed.
pub fn simulate_chain(config: &ChainSimConfig) -> Result<ChainSnapshot> {
    if config.blocks < 1 {
        return Err(Error::invalid("chain needs at least one block"));
    }
    if !(config.initial_difficulty > 0.0 && config.initial_difficulty.is_finite()) {
        return Err(Error::invalid("initial difficulty must be positive"));
    }
    let k = config.params.k() as u64;
    let target = config.params.retarget_target().minutes();
    let start_unix = config.start_time.unix() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut difficulty = config.initial_difficulty;
    let mut minutes = 0.0f64;
    let mut boundary: Option<f64> = config.start_height.is_multiple_of(k).then_some(0.0);
    let mut records = Vec::with_capacity(config.blocks);

    let stamp = |minutes: f64| Timestamp::from_unix((start_unix + minutes * 60.0).round() as i64);
    records.push(HeaderRecord {
        height: BlockHeight(config.start_height),
        time: stamp(0.0)?,
        difficulty,
    });
    for height in config.start_height + 1..config.start_height + config.blocks as u64 {
        let mean = HASHES_PER_DIFFICULTY * difficulty / config.hashrate.per_minute();
        let dt: f64 = Exp1.sample(&mut rng);
        minutes += dt * mean;
        records.push(HeaderRecord {
            height: BlockHeight(height),
            time: stamp(minutes)?,
            difficulty,
        });
        if height % k == 0 {
            if let (true, Some(started)) = (config.retarget, boundary) {
                difficulty *= target / (minutes - started);
            }
            boundary = Some(minutes);
        }
    }
    ChainSnapshot::from_records(records).map_err(Error::from)
}
