use std::fs::File;
use std::io::{BufWriter, IsTerminal, Write};
use std::path::Path;
use std::time::Duration as StdDuration;

use anyhow::{anyhow, bail, Context};
use halving_core::hashrate::{apply_shift, HashrateChange};
use halving_core::ingest::{
    estimate_hashrate, fetch_snapshot_http, load_snapshot_file, model_inputs, model_inputs_at, ChainSnapshot,
};
use halving_core::naive::naive_stddev_from_eta;
use halving_core::retarget::{retarget_eta, retarget_variance};
use halving_core::schedule::{schedule_table, total_supply_limit, EpochRow};
use halving_core::sim::{self, CovarianceEstimate, CovarianceVerdict};
use halving_core::{
    BlockHeight, CovarianceMode, Duration, Granularity, Hashrate, Model, Prediction, RetargetParams,
    RetargetPosition, SimulationConfig, SimulationSummary, Timestamp,
};
use serde::Serialize;

use crate::report::{to_json, OutputReport};
use crate::{AdjustArgs, IntervalArgs, ModelArg, Output, PredictArgs, ScheduleArgs, SimulateArgs, VarianceArg};

pub const ENDPOINT_ENV: &str = "HALVING_ENDPOINT";

/// Reference time: the flag, else a source-provided time, else the wall
/// clock when a person is reading the output.
fn resolve_now(flag: Option<Timestamp>, source: Option<Timestamp>) -> (Option<Timestamp>, &'static str) {
    if let Some(t) = flag {
        return (Some(t), "flag");
    }
    if let Some(t) = source {
        return (Some(t), "snapshot");
    }
    if std::io::stdout().is_terminal() {
        return (Some(Timestamp::now()), "clock");
    }
    (None, "none")
}

#[derive(Debug, Serialize)]
struct SnapshotEcho {
    tip_height: u64,
    tip_time: Timestamp,
    headers: usize,
    /// Hashes per second, when the window allows an estimate.
    hashrate_estimate: Option<f64>,
}

impl SnapshotEcho {
    fn new(snap: &ChainSnapshot) -> Self {
        SnapshotEcho {
            tip_height: snap.tip().height.get(),
            tip_time: snap.tip().time,
            headers: snap.len(),
            hashrate_estimate: estimate_hashrate(snap).ok().map(Hashrate::per_second),
        }
    }
}

#[derive(Debug, Serialize)]
struct PredictEcho {
    source: &'static str,
    height: Option<u64>,
    snapshot_path: Option<String>,
    endpoint: Option<String>,
    snapshot: Option<SnapshotEcho>,
    blocks_remaining: u64,
    halving_height: Option<u64>,
    n: Option<u32>,
    m: Option<u32>,
    model: Model,
    k: u32,
    block_target_minutes: f64,
    variance_formula: Option<&'static str>,
    covariance: Option<CovarianceMode>,
    levels: Vec<f64>,
    now: Option<Timestamp>,
    now_source: &'static str,
}

struct Resolved {
    blocks: u64,
    position: Option<RetargetPosition>,
    halving_height: Option<u64>,
    snapshot: Option<ChainSnapshot>,
}

fn from_snapshot(snap: ChainSnapshot, params: &RetargetParams) -> anyhow::Result<Resolved> {
    let inputs = model_inputs(&snap, params)?;
    Ok(Resolved {
        blocks: inputs.blocks_remaining,
        position: Some(inputs.position),
        halving_height: Some(inputs.halving_height.get()),
        snapshot: Some(snap),
    })
}

fn endpoint_base(flag: &str) -> anyhow::Result<String> {
    if !flag.is_empty() {
        return Ok(flag.to_string());
    }
    std::env::var(ENDPOINT_ENV)
        .ok()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| anyhow!("--endpoint given without a URL and {ENDPOINT_ENV} is not set"))
}

pub fn predict(a: &PredictArgs) -> anyhow::Result<Output> {
    let params = RetargetParams::new(a.k, Duration::from_minutes(10.0))?;
    let mut endpoint = None;
    let (source, resolved) = if let Some(h) = a.height {
        let inputs = model_inputs_at(BlockHeight(h), &params)?;
        let r = Resolved {
            blocks: inputs.blocks_remaining,
            position: Some(inputs.position),
            halving_height: Some(inputs.halving_height.get()),
            snapshot: None,
        };
        ("height", r)
    } else if let Some(n) = a.blocks_remaining {
        let position = match n {
            0 => None,
            _ => Some(RetargetPosition::from_blocks_remaining(n, &params)?),
        };
        let r = Resolved {
            blocks: n,
            position,
            halving_height: None,
            snapshot: None,
        };
        ("blocks_remaining", r)
    } else if let Some(path) = &a.snapshot {
        let snap = load_snapshot_file(path).with_context(|| format!("reading snapshot {}", path.display()))?;
        ("snapshot", from_snapshot(snap, &params)?)
    } else if let Some(flag) = &a.endpoint {
        let base = endpoint_base(flag)?;
        if !(a.timeout_secs > 0.0 && a.timeout_secs.is_finite()) {
            bail!("timeout must be a positive number of seconds, got {}", a.timeout_secs);
        }
        let snap = fetch_snapshot_http(&base, a.window, StdDuration::from_secs_f64(a.timeout_secs))
            .with_context(|| format!("fetching headers from {base}"))?;
        endpoint = Some(base);
        ("endpoint", from_snapshot(snap, &params)?)
    } else {
        bail!("one of --height, --blocks-remaining, --snapshot or --endpoint is required");
    };

    let formula = match (a.variance, a.covariance) {
        (Some(VarianceArg::Simplified), Some(_)) => {
            bail!("--covariance applies to the full variance; drop --variance simplified")
        }
        (Some(v), _) => v,
        (None, Some(_)) => VarianceArg::Full,
        (None, None) => VarianceArg::Simplified,
    };
    let mode = a.covariance.unwrap_or_default();
    let prediction = match (a.model, resolved.position) {
        (ModelArg::Naive, _) => Prediction::naive(resolved.blocks),
        (ModelArg::Retarget, None) => Prediction::reached(Model::Retarget),
        (ModelArg::Retarget, Some(pos)) => match formula {
            VarianceArg::Full => Prediction::retarget(pos, &params, mode)?,
            VarianceArg::Simplified => Prediction::retarget_simplified(pos, &params)?,
        },
    };
    let retarget = a.model == ModelArg::Retarget;
    let (now, now_source) = resolve_now(a.out.now, resolved.snapshot.as_ref().map(|s| s.tip().time));
    let echo = PredictEcho {
        source,
        height: a.height,
        snapshot_path: a.snapshot.as_ref().map(|p| p.display().to_string()),
        endpoint,
        snapshot: resolved.snapshot.as_ref().map(SnapshotEcho::new),
        blocks_remaining: resolved.blocks,
        halving_height: resolved.halving_height,
        n: resolved.position.map(|p| p.n()),
        m: resolved.position.map(|p| p.m()),
        model: prediction.model,
        k: params.k(),
        block_target_minutes: params.block_target().minutes(),
        variance_formula: retarget.then_some(match formula {
            VarianceArg::Full => "full",
            VarianceArg::Simplified => "simplified",
        }),
        covariance: (retarget && formula == VarianceArg::Full).then_some(mode),
        levels: a.out.levels.clone(),
        now,
        now_source,
    };
    let report = OutputReport::new(&prediction, &a.out.levels, now, None, Vec::new(), echo)?;
    if a.out.json {
        return Ok(Output {
            stdout: to_json(&report)?,
            ..Default::default()
        });
    }
    let e = &report.inputs_echo;
    let mut inputs = Vec::new();
    if let Some(s) = &e.snapshot {
        inputs.push(("tip".to_string(), format!("{} at {} UTC", s.tip_height, s.tip_time)));
        if let Some(h) = s.hashrate_estimate {
            inputs.push(("hashrate".to_string(), format!("{h:.4e} H/s over {} headers", s.headers)));
        }
    } else if let Some(h) = e.height {
        inputs.push(("height".to_string(), h.to_string()));
    }
    let mut blocks = format!("{} remaining", e.blocks_remaining);
    if let Some(h) = e.halving_height {
        blocks.push_str(&format!(" to height {h}"));
    }
    if let (true, Some(n), Some(m)) = (retarget, e.n, e.m) {
        blocks.push_str(&format!(" (n={n}, M={m}, k={})", e.k));
    }
    inputs.push(("blocks".to_string(), blocks));
    if let Some(f) = e.variance_formula {
        let v = match e.covariance {
            Some(c) => format!("{f} ({c} covariance)"),
            None => f.to_string(),
        };
        inputs.push(("variance".to_string(), v));
    }
    Ok(Output {
        stdout: report.render(&inputs).into_bytes(),
        ..Default::default()
    })
}

#[derive(Debug, Serialize)]
struct IntervalEcho {
    eta_minutes: f64,
    stddev_minutes: Option<f64>,
    stddev_source: &'static str,
    levels: Vec<f64>,
    now: Option<Timestamp>,
    now_source: &'static str,
}

/// Base prediction from an expected time and an optional spread, defaulting
/// to the fixed-hashrate spread `sqrt(10 * eta)`.
fn base_prediction(eta: Duration, stddev: Option<f64>) -> anyhow::Result<(Prediction, &'static str)> {
    if !eta.minutes().is_finite() {
        bail!("expected time must be finite");
    }
    match stddev {
        Some(s) => {
            if !(s >= 0.0 && s.is_finite()) {
                bail!("standard deviation must be non-negative, got {s}");
            }
            Ok((Prediction::new(Model::Naive, eta, s * s)?, "given"))
        }
        None => {
            let s = naive_stddev_from_eta(eta)?.minutes();
            Ok((Prediction::new(Model::Naive, eta, s * s)?, "naive"))
        }
    }
}

pub fn interval(a: &IntervalArgs) -> anyhow::Result<Output> {
    let (prediction, stddev_source) = base_prediction(Duration::from_minutes(a.eta_minutes), a.stddev_minutes)?;
    let (now, now_source) = resolve_now(a.out.now, None);
    let echo = IntervalEcho {
        eta_minutes: a.eta_minutes,
        stddev_minutes: a.stddev_minutes,
        stddev_source,
        levels: a.out.levels.clone(),
        now,
        now_source,
    };
    let report = OutputReport::new(&prediction, &a.out.levels, now, None, Vec::new(), echo)?;
    let stdout = if a.out.json {
        to_json(&report)?
    } else {
        report.render(&[]).into_bytes()
    };
    Ok(Output {
        stdout,
        ..Default::default()
    })
}

#[derive(Debug, Serialize)]
struct AdjustEcho {
    base_eta_minutes: f64,
    base_eta_at: Option<Timestamp>,
    stddev_minutes: Option<f64>,
    stddev_source: &'static str,
    change: HashrateChange,
    k: u32,
    levels: Vec<f64>,
    now: Option<Timestamp>,
    now_source: &'static str,
}

fn parse_change(a: &AdjustArgs) -> anyhow::Result<HashrateChange> {
    if let Some(x) = a.step {
        return Ok(HashrateChange::StepFar { fraction: x });
    }
    if let Some(g) = &a.gradual {
        return Ok(HashrateChange::Gradual {
            old: Hashrate::new(g[0]).context("--gradual OLD")?,
            new: Hashrate::new(g[1]).context("--gradual NEW")?,
        });
    }
    if let Some(v) = &a.step_near {
        let fraction: f64 = v[0]
            .parse()
            .map_err(|_| anyhow!("--step-near FRACTION must be a number, got {:?}", v[0]))?;
        let blocks: u64 = v[1]
            .parse()
            .map_err(|_| anyhow!("--step-near BLOCKS must be a whole number, got {:?}", v[1]))?;
        return Ok(HashrateChange::StepNear {
            fraction,
            blocks_remaining: blocks,
        });
    }
    bail!("one of --step, --gradual or --step-near is required")
}

pub fn adjust(a: &AdjustArgs) -> anyhow::Result<Output> {
    let params = RetargetParams::new(a.k, Duration::from_minutes(10.0))?;
    let change = parse_change(a)?;
    let (now, now_source) = resolve_now(a.out.now, None);
    let eta = match (a.eta_minutes, a.eta_at) {
        (Some(m), _) => Duration::from_minutes(m),
        (None, Some(at)) => now.ok_or_else(|| anyhow!("--eta-at needs --now"))?.until(at),
        (None, None) => bail!("one of --eta-minutes or --eta-at is required"),
    };
    let (base, stddev_source) = base_prediction(eta, a.stddev_minutes)?;
    let shift = change.shift(&params)?;
    let shifted = apply_shift(&base, shift.shift);
    let echo = AdjustEcho {
        base_eta_minutes: eta.minutes(),
        base_eta_at: a.eta_at,
        stddev_minutes: a.stddev_minutes,
        stddev_source,
        change,
        k: params.k(),
        levels: a.out.levels.clone(),
        now,
        now_source,
    };
    let warnings = shift.warning.into_iter().collect();
    let report = OutputReport::new(&shifted, &a.out.levels, now, Some(shift.shift), warnings, echo)?;
    let stdout = if a.out.json {
        to_json(&report)?
    } else {
        let base_line = match now {
            Some(t) => format!("{} UTC", t.add_duration(eta)?),
            None => eta.to_mixed_string(),
        };
        report.render(&[("base".to_string(), base_line)]).into_bytes()
    };
    Ok(Output {
        stdout,
        ..Default::default()
    })
}

#[derive(Debug, Serialize)]
struct SimulateEcho {
    k: u32,
    n: u32,
    m: u32,
    trials: u64,
    seed: u64,
    granularity: Granularity,
    retarget: bool,
    emit_raw: Option<String>,
}

#[derive(Debug, Serialize)]
struct Expectation {
    label: &'static str,
    value: f64,
    z: f64,
}

#[derive(Debug, Serialize)]
struct SimulateReport {
    summary: SimulationSummary,
    expected_mean: Expectation,
    expected_variance: Vec<Expectation>,
    covariance: Option<CovarianceVerdict>,
    inputs_echo: SimulateEcho,
}

fn write_raw(path: &Path, totals: &[f64]) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    sim::write_raw_totals(&mut out, totals).with_context(|| format!("writing {}", path.display()))?;
    out.flush()?;
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> anyhow::Result<Output> {
    let params = RetargetParams::new(a.k, Duration::from_minutes(10.0))?;
    let position = RetargetPosition::new(a.n, a.m, &params)?;
    let config = SimulationConfig::new(params, position)
        .trials(a.trials)
        .seed(a.seed)
        .granularity(a.granularity)
        .retarget(!a.no_retarget);
    config.validate()?;
    let (summary, totals) = match a.threads {
        Some(0) => bail!("--threads must be at least 1"),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()?
            .install(|| sim::run_with_totals(&config))?,
        None => sim::run_with_totals(&config)?,
    };

    let blocks = position.blocks(&params);
    let (expected_mean, expected_variance) = if a.no_retarget {
        // equilibrium hashrate at constant difficulty: the fixed-rate model
        let b = params.block_target().minutes();
        let mean = blocks as f64 * b;
        let var = blocks as f64 * b * b;
        (
            Expectation {
                label: "fixed_difficulty",
                value: mean,
                z: summary.mean_z(Duration::from_minutes(mean)),
            },
            vec![Expectation {
                label: "fixed_difficulty",
                value: var,
                z: summary.var_z(var),
            }],
        )
    } else {
        let eta = retarget_eta(position, &params)?;
        let variances = [CovarianceMode::Derived, CovarianceMode::PaperPrinted]
            .into_iter()
            .map(|mode| {
                let v = retarget_variance(position, &params, mode)?;
                Ok(Expectation {
                    label: match mode {
                        CovarianceMode::Derived => "retarget_derived",
                        CovarianceMode::PaperPrinted => "retarget_paper",
                    },
                    value: v,
                    z: summary.var_z(v),
                })
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        (
            Expectation {
                label: "retarget",
                value: eta.minutes(),
                z: summary.mean_z(eta),
            },
            variances,
        )
    };
    let covariance = match (a.no_retarget, summary.cov_adjacent, summary.cov_adjacent_se) {
        (false, Some(c), Some(se)) => Some(
            CovarianceEstimate {
                lag: 1,
                covariance: c,
                se,
                pairs: summary.trials,
            }
            .adjudicate(params.k()),
        ),
        _ => None,
    };
    let report = SimulateReport {
        summary,
        expected_mean,
        expected_variance,
        covariance,
        inputs_echo: SimulateEcho {
            k: a.k,
            n: a.n,
            m: a.m,
            trials: a.trials,
            seed: a.seed,
            granularity: a.granularity,
            retarget: !a.no_retarget,
            emit_raw: a.emit_raw.as_ref().map(|p| p.display().to_string()),
        },
    };

    let rendered = if a.json {
        to_json(&report)?
    } else {
        render_simulation(&report).into_bytes()
    };
    let mut out = Output::default();
    match &a.emit_raw {
        Some(p) if p.as_os_str() == "-" => {
            sim::write_raw_totals(&mut out.stdout, &totals)?;
            out.stderr = rendered;
        }
        Some(p) => {
            write_raw(p, &totals)?;
            out.stdout = rendered;
        }
        None => out.stdout = rendered,
    }
    Ok(out)
}

fn render_simulation(r: &SimulateReport) -> String {
    let s = &r.summary;
    let e = &r.inputs_echo;
    let mut lines = vec![
        format!(
            "{:<12}k={} n={} M={} ({} blocks), {} trials, seed {}, {}, retarget {}",
            "setup",
            e.k,
            e.n,
            e.m,
            (e.n as u64 - 1) * e.k as u64 + e.m as u64,
            e.trials,
            e.seed,
            match e.granularity {
                Granularity::PerBlock => "per_block",
                Granularity::PerInterval => "per_interval",
            },
            if e.retarget { "on" } else { "off" }
        ),
        format!(
            "{:<12}{:.3} min (se {:.3}), {}",
            "mean",
            s.mean_t.minutes(),
            s.se_mean.minutes(),
            s.mean_t.to_mixed_string()
        ),
        format!("{:<12}{:.1} min^2 (se {:.1})", "variance", s.var_t, s.se_var),
        format!(
            "{:<12}{} {:.3} min, z = {:+.2}",
            "expected",
            r.expected_mean.label,
            r.expected_mean.value,
            r.expected_mean.z
        ),
    ];
    for v in &r.expected_variance {
        lines.push(format!("{:<12}{} {:.1} min^2, z = {:+.2}", "", v.label, v.value, v.z));
    }
    if let (Some(c), Some(se), Some(verdict)) = (s.cov_adjacent, s.cov_adjacent_se, &r.covariance) {
        lines.push(format!(
            "{:<12}{c:.5} (se {se:.5}); z vs derived {:+.1}, vs paper {:+.1}; selected {}",
            "covariance",
            verdict.derived_z,
            verdict.printed_z,
            verdict.selected.map_or("neither", CovarianceMode::name)
        ));
    }
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

#[derive(Debug, Serialize)]
struct ScheduleReport {
    rows: Vec<EpochRow>,
    supply_limit: f64,
    inputs_echo: ScheduleEcho,
}

#[derive(Debug, Serialize)]
struct ScheduleEcho {
    epochs: u64,
}

pub fn schedule(a: &ScheduleArgs) -> anyhow::Result<Output> {
    // 2^-64 of the subsidy is far below a satoshi; past that the table is all zeros
    if a.epochs > 64 {
        bail!("--epochs must be at most 64, got {}", a.epochs);
    }
    let report = ScheduleReport {
        rows: schedule_table(a.epochs),
        supply_limit: total_supply_limit(),
        inputs_echo: ScheduleEcho { epochs: a.epochs },
    };
    let stdout = if a.json {
        to_json(&report)?
    } else {
        let mut s = format!("{:>5}  {:>10}  {:>14}  {:>16}\n", "epoch", "height", "subsidy BTC", "supply BTC");
        for r in &report.rows {
            s.push_str(&format!(
                "{:>5}  {:>10}  {:>14.8}  {:>16.8}\n",
                r.epoch,
                r.height.get(),
                r.subsidy.btc(),
                r.cumulative_supply
            ));
        }
        s.into_bytes()
    };
    Ok(Output {
        stdout,
        ..Default::default()
    })
}
