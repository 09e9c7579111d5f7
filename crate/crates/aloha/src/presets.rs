//! Preset experiment sets behind `aloha reproduce`.

use std::path::{Path, PathBuf};

use aloha_core::slotted::{ccdf_slotted, relative_agreement_horizon};
use aloha_core::{CcdfPoints, SlottedModelParams, SlottedQuantity};
use serde::Serialize;

use crate::config::{
    ExperimentConfig, FiniteModelConfig, PacketSpec, ReferenceKind, SlottedModelConfig,
    SlottedSampler, UserCountSpec,
};
use crate::error::{AppError, Result};
use crate::experiment::{run_experiment, ExperimentResult};
use crate::output::{write_ccdf, write_json, FitSummary};

pub const SUMMARY_FILE: &str = "reproduce.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    Fig3,
    Fig4,
    Fig5,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Scale {
    Desk,
    Full,
}

const SEED: u64 = 20_240_601;

pub const FIG3_USERS: [usize; 4] = [2, 4, 10, 20];
/// `None` is the untruncated law.
pub const FIG5_CAPS: [Option<u32>; 6] = [Some(6), Some(8), Some(10), Some(12), Some(14), None];
/// Relative tolerance of the fig5 agreement horizon.
pub const FIG5_HORIZON_TOL: f64 = 0.1;
const FIG5_HORIZON_MAX: u64 = 1 << 20;

fn exponential_finite(users: usize, rate: f64) -> FiniteModelConfig {
    FiniteModelConfig {
        users,
        lambda: rate,
        nu: rate,
        packet: PacketSpec::Exponential { rate: 1.0 },
    }
}

pub fn fig5_model(cap: Option<u32>) -> SlottedModelConfig {
    SlottedModelConfig {
        nu: std::f64::consts::LN_2,
        lambda: None,
        allow_unequal_rates: false,
        users: UserCountSpec::Geometric {
            mean: 3.0,
            support_min: None,
            cap,
        },
    }
}

pub fn cap_label(cap: Option<u32>) -> String {
    match cap {
        Some(k) => format!("K{k}"),
        None => "Kinf".to_string(),
    }
}

/// The labelled experiment configs of one preset.
pub fn preset_configs(figure: Figure, scale: Scale) -> Vec<(String, ExperimentConfig)> {
    match figure {
        Figure::Fig3 => FIG3_USERS
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let mut c = ExperimentConfig::finite(exponential_finite(m, 1.5), 100_000, 1, SEED);
                c.experiment = 300 + i as u64;
                (format!("M{m}"), c)
            })
            .collect(),
        Figure::Fig4 => {
            let model = exponential_finite(3, 2.0 / 3.0);
            let mut start = ExperimentConfig::finite(model, 100_000, 1, SEED);
            start.experiment = 400;
            start.reference = Some(ReferenceKind::Transient);
            let (successes, warmup) = match scale {
                Scale::Desk => (1_000_000, 10_000),
                Scale::Full => (10_000_000, 100_000),
            };
            let mut steady = ExperimentConfig::finite(model, 1, successes, SEED);
            steady.warmup = warmup;
            steady.experiment = 401;
            steady.reference = Some(ReferenceKind::Steady);
            vec![("start".to_string(), start), ("steady".to_string(), steady)]
        }
        Figure::Fig5 => {
            let per_replicate = match scale {
                Scale::Desk => 10_000,
                Scale::Full => 100_000,
            };
            FIG5_CAPS
                .iter()
                .enumerate()
                .map(|(i, &cap)| {
                    let mut c = ExperimentConfig::slotted(fig5_model(cap), 10, per_replicate, SEED);
                    c.sampler = SlottedSampler::Conditional;
                    c.experiment = 500 + i as u64;
                    (cap_label(cap), c)
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone)]
pub struct PresetRun {
    pub label: String,
    pub config: ExperimentConfig,
    pub result: ExperimentResult,
}

#[derive(Debug, Clone)]
pub struct ReproduceResult {
    pub figure: Figure,
    pub runs: Vec<PresetRun>,
    /// fig5 only: relative agreement horizon of each finite cap.
    pub horizons: Vec<(u32, u64)>,
    pub summary_path: PathBuf,
}

impl ReproduceResult {
    pub fn fit(&self, label: &str) -> Option<&FitSummary> {
        self.runs
            .iter()
            .find(|r| r.label == label)
            .map(|r| &r.result.fit)
    }
}

/// Every `t <= 100`, then 20 points per decade, while the survival stays above 1e-12.
fn analytic_slots_ccdf(params: &SlottedModelParams) -> Result<CcdfPoints> {
    let mut x = Vec::new();
    let mut survival = Vec::new();
    let mut push = |t: u64| -> bool {
        let p = ccdf_slotted(t, SlottedQuantity::Slots, params);
        if p < 1e-12 {
            return false;
        }
        if x.last().is_none_or(|&last| (t as f64) > last) {
            x.push(t as f64);
            survival.push(p);
        }
        true
    };
    let mut alive = (0..=100).all(&mut push);
    let mut i = 1;
    while alive && i <= 20 * 8 {
        alive = push(10f64.powf(2.0 + i as f64 / 20.0).round() as u64);
        i += 1;
    }
    Ok(CcdfPoints::from_curve(x, survival)?)
}

/// Relative horizon of each finite cap against the untruncated law.
pub fn fig5_horizons() -> Result<Vec<(u32, u64)>> {
    let full = fig5_model(None).build()?;
    FIG5_CAPS
        .iter()
        .flatten()
        .map(|&k| {
            let capped = fig5_model(Some(k)).build()?;
            let h = relative_agreement_horizon(
                |t| ccdf_slotted(t, SlottedQuantity::Slots, &capped),
                |t| ccdf_slotted(t, SlottedQuantity::Slots, &full),
                FIG5_HORIZON_TOL,
                FIG5_HORIZON_MAX,
            );
            Ok((k, h))
        })
        .collect()
}

#[derive(Serialize)]
struct RunSummary<'a> {
    label: &'a str,
    dir: &'a str,
    fit: &'a FitSummary,
}

#[derive(Serialize)]
struct HorizonSummary {
    cap: u32,
    horizon: u64,
}

/// Runs a preset into `out/<label>/` and writes `out/reproduce.json`.
pub fn reproduce(
    figure: Figure,
    scale: Scale,
    out: &Path,
    workers: Option<usize>,
) -> Result<ReproduceResult> {
    std::fs::create_dir_all(out).map_err(|e| AppError::io(out, e))?;
    let mut runs = Vec::new();
    for (label, mut config) in preset_configs(figure, scale) {
        config.workers = workers;
        let result = run_experiment(&config, &out.join(&label))?;
        runs.push(PresetRun {
            label,
            config,
            result,
        });
    }
    let mut horizons = Vec::new();
    if figure == Figure::Fig5 {
        for run in &runs {
            if let crate::config::ModelConfig::Slotted(m) = &run.config.model {
                let points = analytic_slots_ccdf(&m.build()?)?;
                write_ccdf(&run.result.out_dir.join("analytic_ccdf.csv"), &points)?;
            }
        }
        horizons = fig5_horizons()?;
    }

    let summary = serde_json::json!({
        "figure": figure.name(),
        "scale": match scale { Scale::Desk => "desk", Scale::Full => "full" },
        "runs": runs.iter().map(|r| RunSummary { label: &r.label, dir: &r.label, fit: &r.result.fit }).collect::<Vec<_>>(),
        "horizons": (figure == Figure::Fig5).then(|| serde_json::json!({
            "relative_tolerance": FIG5_HORIZON_TOL,
            "caps": horizons.iter().map(|&(cap, horizon)| HorizonSummary { cap, horizon }).collect::<Vec<_>>(),
        })),
    });
    let summary_path = out.join(SUMMARY_FILE);
    write_json(&summary_path, &summary)?;
    Ok(ReproduceResult {
        figure,
        runs,
        horizons,
        summary_path,
    })
}
