//! Python bindings: `import halving_eta`.

use halving_core::hashrate::{self, HashrateChange};
use halving_core::ingest::{self, load_snapshot_file};
use halving_core::retarget;
use halving_core::schedule::schedule_table;
use halving_core::sim::{self, DEFAULT_SEED};
use halving_core::{
    BlockHeight, CovarianceMode, Duration, Granularity, Hashrate, IngestError, Model, RetargetParams,
    RetargetPosition, SimulationConfig, Timestamp,
};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: halving_core::Error) -> PyErr {
    match e {
        halving_core::Error::Ingest(inner) => ingest_err(inner),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn ingest_err(e: IngestError) -> PyErr {
    match e {
        IngestError::Io { .. } | IngestError::Connection(_) | IngestError::HttpStatus(_) => {
            PyOSError::new_err(e.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

fn params(k: u32, block_minutes: f64) -> PyResult<RetargetParams> {
    RetargetParams::new(k, Duration::from_minutes(block_minutes)).map_err(value_err)
}

fn covariance(name: &str) -> PyResult<CovarianceMode> {
    name.parse().map_err(value_err)
}

/// Expected time to the halving (minutes from now) and its spread.
#[pyclass(frozen, module = "halving_eta")]
struct Prediction(halving_core::Prediction);

#[pymethods]
impl Prediction {
    #[new]
    #[pyo3(signature = (eta_minutes, variance, model = "naive"))]
    fn new(eta_minutes: f64, variance: f64, model: &str) -> PyResult<Self> {
        let model = match model {
            "naive" => Model::Naive,
            "retarget" => Model::Retarget,
            other => return Err(PyValueError::new_err(format!("unknown model {other:?}"))),
        };
        halving_core::Prediction::new(model, Duration::from_minutes(eta_minutes), variance)
            .map(Prediction)
            .map_err(value_err)
    }

    #[getter]
    fn model(&self) -> &'static str {
        match self.0.model {
            Model::Naive => "naive",
            Model::Retarget => "retarget",
        }
    }

    #[getter]
    fn eta_minutes(&self) -> f64 {
        self.0.eta.minutes()
    }

    #[getter]
    fn variance(&self) -> f64 {
        self.0.variance
    }

    #[getter]
    fn stddev_minutes(&self) -> f64 {
        self.0.stddev.minutes()
    }

    /// `(lower, upper)` in minutes from now.
    fn interval(&self, level: f64) -> PyResult<(f64, f64)> {
        let ci = self.0.interval(level).map_err(value_err)?;
        Ok((ci.lower.minutes(), ci.upper.minutes()))
    }

    /// Calendar time of the expected halving, `YYYY-MM-DD HH:MM` UTC.
    fn eta_at(&self, now: &str) -> PyResult<String> {
        let now = Timestamp::parse(now).map_err(value_err)?;
        Ok(now.add_duration(self.0.eta).map_err(value_err)?.to_string())
    }

    /// Same prediction moved by `minutes` (negative is sooner).
    fn shifted(&self, minutes: f64) -> Self {
        Prediction(hashrate::apply_shift(&self.0, Duration::from_minutes(minutes)))
    }

    fn __repr__(&self) -> String {
        format!(
            "Prediction(model={:?}, eta_minutes={}, stddev_minutes={})",
            self.model(),
            self.eta_minutes(),
            self.stddev_minutes()
        )
    }
}

#[pyclass(frozen, get_all, module = "halving_eta")]
struct SimulationSummary {
    mean: f64,
    variance: f64,
    se_mean: f64,
    se_variance: f64,
    cov_adjacent: Option<f64>,
    cov_adjacent_se: Option<f64>,
    trials: u64,
}

#[pymethods]
impl SimulationSummary {
    fn __repr__(&self) -> String {
        format!(
            "SimulationSummary(mean={}, variance={}, se_mean={}, se_variance={}, trials={})",
            self.mean, self.variance, self.se_mean, self.se_variance, self.trials
        )
    }
}

#[pyfunction]
fn naive_predict(blocks_remaining: u64) -> Prediction {
    Prediction(halving_core::Prediction::naive(blocks_remaining))
}

/// Retarget-model prediction for `n` intervals with the halving `m` blocks
/// into the last one. `variance` is "full" or "simplified".
#[pyfunction]
#[pyo3(signature = (n, m, k = 2016, block_minutes = 10.0, variance = "full", covariance = "derived"))]
fn retarget_predict(
    n: u32,
    m: u32,
    k: u32,
    block_minutes: f64,
    variance: &str,
    covariance: &str,
) -> PyResult<Prediction> {
    let p = params(k, block_minutes)?;
    let pos = RetargetPosition::new(n, m, &p).map_err(value_err)?;
    let pred = match variance {
        "full" => halving_core::Prediction::retarget(pos, &p, self::covariance(covariance)?),
        "simplified" => halving_core::Prediction::retarget_simplified(pos, &p),
        other => return Err(PyValueError::new_err(format!("unknown variance formula {other:?}"))),
    };
    pred.map(Prediction).map_err(value_err)
}

/// `(blocks_remaining, n, m, halving_height)` for a chain tip.
#[pyfunction]
#[pyo3(signature = (height, k = 2016))]
fn position_from_height(height: u64, k: u32) -> PyResult<(u64, u32, u32, u64)> {
    let p = params(k, 10.0)?;
    let inputs = ingest::model_inputs_at(BlockHeight(height), &p).map_err(value_err)?;
    Ok((
        inputs.blocks_remaining,
        inputs.position.n(),
        inputs.position.m(),
        inputs.halving_height.get(),
    ))
}

#[pyfunction]
#[pyo3(signature = (n, m, k = 2016, covariance = "derived"))]
fn retarget_variance(n: u32, m: u32, k: u32, covariance: &str) -> PyResult<f64> {
    let p = params(k, 10.0)?;
    let pos = RetargetPosition::new(n, m, &p).map_err(value_err)?;
    retarget::retarget_variance(pos, &p, self::covariance(covariance)?).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (m, k = 2016))]
fn simplified_variance(m: u32, k: u32) -> PyResult<f64> {
    retarget::simplified_variance(m, &params(k, 10.0)?).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (k = 2016, covariance = "derived"))]
fn marginal_variance(k: u32, covariance: &str) -> PyResult<f64> {
    retarget::marginal_variance_per_interval(&params(k, 10.0)?, self::covariance(covariance)?).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (k = 2016))]
fn drift_factor(k: u32) -> PyResult<f64> {
    Ok(retarget::schedule_drift_factor(&params(k, 10.0)?))
}

#[pyfunction]
fn two_sided_z(level: f64) -> PyResult<f64> {
    halving_core::stats::two_sided_z(level).map_err(value_err)
}

/// Shift in minutes plus an optional warning.
#[pyfunction]
#[pyo3(signature = (fraction, k = 2016))]
fn step_shift(fraction: f64, k: u32) -> PyResult<(f64, Option<String>)> {
    let s = HashrateChange::StepFar { fraction }
        .shift(&params(k, 10.0)?)
        .map_err(value_err)?;
    Ok((s.shift.minutes(), s.warning))
}

#[pyfunction]
#[pyo3(signature = (old, new, k = 2016))]
fn gradual_shift(old: f64, new: f64, k: u32) -> PyResult<f64> {
    let old = Hashrate::new(old).map_err(value_err)?;
    let new = Hashrate::new(new).map_err(value_err)?;
    Ok(hashrate::gradual_shift(old, new, &params(k, 10.0)?).minutes())
}

#[pyfunction]
#[pyo3(signature = (fraction, blocks_remaining, k = 2016))]
fn step_near_shift(fraction: f64, blocks_remaining: u64, k: u32) -> PyResult<f64> {
    hashrate::step_shift_near(fraction, blocks_remaining, &params(k, 10.0)?)
        .map(Duration::minutes)
        .map_err(value_err)
}

#[allow(clippy::too_many_arguments)]
#[pyfunction]
#[pyo3(signature = (k, n, m, trials = 100_000, seed = DEFAULT_SEED, granularity = "per_interval", retarget = true))]
fn simulate(
    py: Python<'_>,
    k: u32,
    n: u32,
    m: u32,
    trials: u64,
    seed: u64,
    granularity: &str,
    retarget: bool,
) -> PyResult<SimulationSummary> {
    let p = params(k, 10.0)?;
    let pos = RetargetPosition::new(n, m, &p).map_err(value_err)?;
    let g: Granularity = granularity.parse().map_err(value_err)?;
    let config = SimulationConfig::new(p, pos)
        .trials(trials)
        .seed(seed)
        .granularity(g)
        .retarget(retarget);
    let s = py.detach(|| sim::run(&config)).map_err(value_err)?;
    Ok(SimulationSummary {
        mean: s.mean_t.minutes(),
        variance: s.var_t,
        se_mean: s.se_mean.minutes(),
        se_variance: s.se_var,
        cov_adjacent: s.cov_adjacent,
        cov_adjacent_se: s.cov_adjacent_se,
        trials: s.trials,
    })
}

/// `(epoch, height, subsidy, cumulative_supply)` rows.
#[pyfunction]
#[pyo3(signature = (last_epoch = 4))]
fn schedule(last_epoch: u64) -> Vec<(u64, u64, f64, f64)> {
    schedule_table(last_epoch)
        .into_iter()
        .map(|r| (r.epoch, r.height.get(), r.subsidy.btc(), r.cumulative_supply))
        .collect()
}

/// Hashes per second over a snapshot file.
#[pyfunction]
fn estimate_hashrate(path: &str) -> PyResult<f64> {
    let snap = load_snapshot_file(path).map_err(ingest_err)?;
    ingest::estimate_hashrate(&snap)
        .map(Hashrate::per_second)
        .map_err(ingest_err)
}

#[pymodule]
fn halving_eta(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Prediction>()?;
    m.add_class::<SimulationSummary>()?;
    m.add_function(wrap_pyfunction!(naive_predict, m)?)?;
    m.add_function(wrap_pyfunction!(retarget_predict, m)?)?;
    m.add_function(wrap_pyfunction!(position_from_height, m)?)?;
    m.add_function(wrap_pyfunction!(retarget_variance, m)?)?;
    m.add_function(wrap_pyfunction!(simplified_variance, m)?)?;
    m.add_function(wrap_pyfunction!(marginal_variance, m)?)?;
    m.add_function(wrap_pyfunction!(drift_factor, m)?)?;
    m.add_function(wrap_pyfunction!(two_sided_z, m)?)?;
    m.add_function(wrap_pyfunction!(step_shift, m)?)?;
    m.add_function(wrap_pyfunction!(gradual_shift, m)?)?;
    m.add_function(wrap_pyfunction!(step_near_shift, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(schedule, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_hashrate, m)?)?;
    Ok(())
}
