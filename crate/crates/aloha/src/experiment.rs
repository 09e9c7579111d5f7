//! Replication fan-out, aggregation and the output files of one experiment.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use aloha_core::bounds::{asymptotic_slope, BoundKind, ModelParams};
use aloha_core::finite::{simulate_finite, MAX_EVENTS};
use aloha_core::slotted::{sample_mixture, simulate_slotted};
use aloha_core::stability::{classify_finite, classify_slotted};
use aloha_core::tail::{empirical_ccdf, fit_loglog_slope};
use aloha_core::{RandomStream, SimulationOptions, StabilityVerdict};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{EngineKind, ExperimentConfig, ModelConfig, Quantity, SlottedSampler};
use crate::error::{csv_error, AppError, Result};
use crate::output::{format_float, write_ccdf, write_json, FitSummary};

pub const SAMPLES_FILE: &str = "samples.csv";
pub const CCDF_FILE: &str = "ccdf.csv";
pub const FIT_FILE: &str = "fit.json";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Delay {
    Time(f64),
    Slots(u64),
}

impl Delay {
    pub fn as_f64(self) -> f64 {
        match self {
            Delay::Time(t) => t,
            Delay::Slots(t) => t as f64,
        }
    }
}

/// One success as written to `samples.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRow {
    pub replicate: u64,
    /// 1-based success index within the replicate, warmup included.
    pub m: u64,
    /// 1-based departing user (finite) or the drawn user count (slotted).
    pub who: u32,
    pub t: Delay,
    pub n: u64,
    /// Present when full-state instrumentation is on; inner `None` when unresolved.
    pub nf: Option<Option<u64>>,
    pub lmin: Option<f64>,
}

#[derive(Debug, Clone, Default)]
struct ReplicateOutput {
    rows: Vec<SampleRow>,
    timer_events: u64,
    collisions: u64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub out_dir: PathBuf,
    pub samples_path: PathBuf,
    pub ccdf_path: PathBuf,
    pub fit_path: PathBuf,
    pub summary_path: PathBuf,
    pub fit: FitSummary,
    pub rows: usize,
}

fn run_replicate(config: &ExperimentConfig, replicate: u64) -> Result<ReplicateOutput> {
    let mut rng = RandomStream::for_replicate(config.master_seed, config.experiment, replicate);
    let skip = config.warmup as usize;
    match &config.model {
        ModelConfig::Finite(model) => {
            let params = model.build()?;
            let opts = SimulationOptions::departures(config.successes)
                .with_instrumentation(config.core_instrumentation())
                .with_max_events(config.max_events.unwrap_or(MAX_EVENTS));
            let trace = simulate_finite(&params, &opts, &mut rng)?;
            let rows = (skip..trace.len())
                .map(|i| SampleRow {
                    replicate,
                    m: i as u64 + 1,
                    who: trace.departing_user[i] + 1,
                    t: Delay::Time(trace.delays[i]),
                    n: trace.retx_counts[i],
                    nf: trace.nf_samples.as_ref().map(|v| v[i]),
                    lmin: trace.min_residual.as_ref().map(|v| v[i]),
                })
                .collect();
            Ok(ReplicateOutput {
                rows,
                timer_events: trace.timer_events,
                collisions: trace.collisions,
            })
        }
        ModelConfig::Slotted(model) => {
            let params = model.build()?;
            let samples = match config.sampler {
                SlottedSampler::Slots => simulate_slotted(&params, config.successes, &mut rng)?,
                SlottedSampler::Conditional => (0..config.successes)
                    .map(|_| sample_mixture(&params, &mut rng))
                    .collect::<aloha_core::Result<Vec<_>>>()?,
            };
            let rows = samples
                .iter()
                .enumerate()
                .skip(skip)
                .map(|(i, s)| SampleRow {
                    replicate,
                    m: i as u64 + 1,
                    who: s.users,
                    t: Delay::Slots(s.slots),
                    n: s.attempts,
                    nf: None,
                    lmin: None,
                })
                .collect();
            Ok(ReplicateOutput {
                rows,
                ..Default::default()
            })
        }
    }
}

fn write_samples(
    path: &Path,
    config: &ExperimentConfig,
    outputs: &[ReplicateOutput],
) -> Result<()> {
    let mut header = vec![
        "replicate",
        "m",
        match config.engine {
            EngineKind::Finite => "user",
            EngineKind::Slotted => "M_drawn",
        },
        "T",
        "N",
    ];
    if config.instrumentation.full_state {
        header.push("Nf");
    }
    if config.instrumentation.min_residual {
        header.push("Lmin");
    }
    let mut w = csv::Writer::from_writer(crate::output::create(path)?);
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for row in outputs.iter().flat_map(|o| &o.rows) {
        record.clear();
        record.push(row.replicate.to_string());
        record.push(row.m.to_string());
        record.push(row.who.to_string());
        record.push(match row.t {
            Delay::Time(t) => format_float(t),
            Delay::Slots(t) => t.to_string(),
        });
        record.push(row.n.to_string());
        if let Some(nf) = row.nf {
            record.push(nf.map(|v| v.to_string()).unwrap_or_default());
        }
        if let Some(l) = row.lmin {
            record.push(format_float(l));
        }
        w.write_record(&record).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

fn quantity_values(quantity: Quantity, outputs: &[ReplicateOutput]) -> Vec<f64> {
    let rows = outputs.iter().flat_map(|o| &o.rows);
    match quantity {
        Quantity::T => rows.map(|r| r.t.as_f64()).collect(),
        Quantity::N => rows.map(|r| r.n as f64).collect(),
        Quantity::Nf => rows
            .filter_map(|r| r.nf.flatten())
            .map(|v| v as f64)
            .collect(),
        Quantity::Lmin => rows.filter_map(|r| r.lmin).collect(),
    }
}

fn quantity_name(q: Quantity) -> &'static str {
    match q {
        Quantity::T => "T",
        Quantity::N => "N",
        Quantity::Nf => "Nf",
        Quantity::Lmin => "Lmin",
    }
}

/// Core parameters of the configured model.
pub fn model_params(config: &ExperimentConfig) -> Result<ModelParams> {
    Ok(match &config.model {
        ModelConfig::Finite(m) => ModelParams::Finite(m.build()?),
        ModelConfig::Slotted(m) => ModelParams::Slotted(m.build()?),
    })
}

/// Every analytic slope that is defined for the model.
pub fn reference_slopes(params: &ModelParams) -> BTreeMap<&'static str, f64> {
    BoundKind::ALL
        .iter()
        .filter_map(|&k| asymptotic_slope(k, params).ok().map(|s| (k.name(), s)))
        .collect()
}

pub fn stability_of(params: &ModelParams) -> Option<StabilityVerdict> {
    match params {
        ModelParams::Finite(p) => {
            let mu = p.packet().decay_rate()?;
            classify_finite(p.users(), p.lambda(), p.nu(), mu).ok()
        }
        ModelParams::Slotted(p) => classify_slotted(p.users().decay_rate()?, p.nu()).ok(),
    }
}

#[derive(Serialize)]
struct StabilityJson {
    verdict: &'static str,
    rule: &'static str,
}

/// Runs every replication, then writes the four output files into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentResult> {
    config.validate()?;
    let started = Instant::now();
    let params = model_params(config)?;
    let window = config.window()?;
    std::fs::create_dir_all(out_dir).map_err(|e| AppError::io(out_dir, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| AppError::config(format!("worker pool: {e}")))?;
    // Indexed collect keeps replicate order whatever the completion order.
    let outputs: Vec<ReplicateOutput> = pool.install(|| {
        (0..config.replications)
            .into_par_iter()
            .map(|r| run_replicate(config, r))
            .collect::<Result<Vec<_>>>()
    })?;

    let samples_path = out_dir.join(SAMPLES_FILE);
    write_samples(&samples_path, config, &outputs)?;
    let rows: usize = outputs.iter().map(|o| o.rows.len()).sum();

    let values = quantity_values(config.fit_quantity, &outputs);
    let ccdf_path = out_dir.join(CCDF_FILE);
    let mut fit = match empirical_ccdf(&values) {
        Ok(points) => {
            write_ccdf(&ccdf_path, &points)?;
            match fit_loglog_slope(&points, window) {
                Ok(f) => FitSummary::from_fit(&f, values.len()),
                Err(e) => FitSummary::failed(window, values.len(), e.to_string()),
            }
        }
        Err(e) => {
            write_ccdf(
                &ccdf_path,
                &aloha_core::CcdfPoints {
                    x: Vec::new(),
                    survival: Vec::new(),
                    sample_count: values.len(),
                },
            )?;
            FitSummary::failed(window, values.len(), e.to_string())
        }
    };
    fit.quantity = Some(quantity_name(config.fit_quantity).to_string());
    if let Some(kind) = config.effective_reference().bound_kind() {
        if let Ok(slope) = asymptotic_slope(kind, &params) {
            fit.reference_slope = Some(slope);
            fit.reference_kind = Some(kind.name().to_string());
        }
    }
    let fit_path = out_dir.join(FIT_FILE);
    write_json(&fit_path, &fit)?;

    let unresolved_nf = outputs
        .iter()
        .flat_map(|o| &o.rows)
        .filter(|r| r.nf == Some(None))
        .count();
    let summary = serde_json::json!({
        "tool": "aloha",
        "version": env!("CARGO_PKG_VERSION"),
        "engine": config.engine.name(),
        "config": config.to_json(),
        "rows": rows,
        "timer_events": outputs.iter().map(|o| o.timer_events).sum::<u64>(),
        "collisions": outputs.iter().map(|o| o.collisions).sum::<u64>(),
        "unresolved_nf": config.instrumentation.full_state.then_some(unresolved_nf),
        "fit": &fit,
        "reference_slopes": reference_slopes(&params),
        "stability": stability_of(&params).map(|v| StabilityJson { verdict: v.verdict.name(), rule: v.rule }),
        "files": { "samples": SAMPLES_FILE, "ccdf": CCDF_FILE, "fit": FIT_FILE },
        "runtime_seconds": started.elapsed().as_secs_f64(),
    });
    let summary_path = out_dir.join(SUMMARY_FILE);
    write_json(&summary_path, &summary)?;

    Ok(ExperimentResult {
        out_dir: out_dir.to_path_buf(),
        samples_path,
        ccdf_path,
        fit_path,
        summary_path,
        fit,
        rows,
    })
}

/// Writes `(n, lower, upper)` rows of the two bound laws.
pub fn write_bounds(
    out: &mut dyn Write,
    params: &aloha_core::FiniteModelParams,
    grid: &[u64],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let stdout = Path::new("<bounds>");
    w.write_record(["n", "lower", "upper"])
        .map_err(|e| csv_error(stdout, e))?;
    for &n in grid {
        let lo = aloha_core::bounds::bound_ccdf(BoundKind::LowerN, n, params)?.value();
        let hi = aloha_core::bounds::bound_ccdf(BoundKind::UpperN, n, params)?.value();
        w.write_record([n.to_string(), format_float(lo), format_float(hi)])
            .map_err(|e| csv_error(stdout, e))?;
    }
    w.flush().map_err(|e| AppError::io(stdout, e))
}

/// Every `n` up to 100, then `per_decade` log-spaced points up to `n_max`.
pub fn bounds_grid(n_max: u64, per_decade: u32) -> Vec<u64> {
    let mut grid: Vec<u64> = (0..=n_max.min(100)).collect();
    if n_max > 100 && per_decade > 0 {
        let decades = (n_max as f64).log10() - 2.0;
        let steps = (decades * per_decade as f64).ceil() as u64;
        for i in 1..=steps {
            let n = (10f64.powf(2.0 + i as f64 / per_decade as f64).round() as u64).min(n_max);
            if grid.last() != Some(&n) {
                grid.push(n);
            }
        }
    }
    grid
}
