//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "engine": "finite",
//!   "model": { "M": 3, "lambda": 0.6667, "nu": 0.6667,
//!              "packet": { "type": "exponential", "rate": 1.0 } },
//!   "replications": 1, "successes": 1000000, "warmup": 10000,
//!   "master_seed": 7
//! }
//! ```

use std::path::Path;

use aloha_core::bounds::BoundKind;
use aloha_core::tail::Window;
use aloha_core::{
    FiniteModelParams, Instrumentation, PacketDistribution, SlottedModelParams,
    UserCountDistribution,
};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Finite,
    Slotted,
}

impl EngineKind {
    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Finite => "finite",
            EngineKind::Slotted => "slotted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PacketSpec {
    Exponential { rate: f64 },
    Constant { length: f64 },
    TruncatedExponential { rate: f64, cap: f64 },
    Gamma { shape: f64, rate: f64 },
}

impl PacketSpec {
    pub fn build(&self) -> Result<PacketDistribution> {
        Ok(match *self {
            PacketSpec::Exponential { rate } => PacketDistribution::exponential(rate)?,
            PacketSpec::Constant { length } => PacketDistribution::constant(length)?,
            PacketSpec::TruncatedExponential { rate, cap } => {
                PacketDistribution::truncated_exponential(rate, cap)?
            }
            PacketSpec::Gamma { shape, rate } => PacketDistribution::gamma(shape, rate)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum UserCountSpec {
    Fixed {
        #[serde(alias = "M")]
        users: u32,
    },
    /// Geometric on `{1, 2, ...}`, optionally capped as `min(M, cap)`.
    Geometric {
        mean: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        support_min: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<u32>,
    },
}

impl UserCountSpec {
    pub fn build(&self) -> Result<UserCountDistribution> {
        Ok(match *self {
            UserCountSpec::Fixed { users } => UserCountDistribution::fixed(users)?,
            UserCountSpec::Geometric {
                mean,
                support_min,
                cap,
            } => {
                if support_min.is_some_and(|s| s != 1) {
                    return Err(AppError::config("geometric users: support_min must be 1"));
                }
                match cap {
                    Some(k) => UserCountDistribution::truncated_geometric(mean, k)?,
                    None => UserCountDistribution::geometric(mean)?,
                }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteModelConfig {
    #[serde(alias = "M")]
    pub users: usize,
    pub lambda: f64,
    pub nu: f64,
    pub packet: PacketSpec,
}

impl FiniteModelConfig {
    pub fn build(&self) -> Result<FiniteModelParams> {
        Ok(FiniteModelParams::new(
            self.users,
            self.lambda,
            self.nu,
            self.packet.build()?,
        )?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlottedModelConfig {
    pub nu: f64,
    /// Defaults to `nu`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub allow_unequal_rates: bool,
    pub users: UserCountSpec,
}

impl SlottedModelConfig {
    pub fn build(&self) -> Result<SlottedModelParams> {
        Ok(SlottedModelParams::with_arrival_rate(
            self.nu,
            self.lambda.unwrap_or(self.nu),
            self.users.build()?,
            self.allow_unequal_rates,
        )?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ModelConfig {
    Finite(FiniteModelConfig),
    Slotted(SlottedModelConfig),
}

/// Quantity whose pooled CCDF is written and fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Quantity {
    #[default]
    T,
    N,
    Nf,
    Lmin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlottedSampler {
    /// Slot-by-slot simulation, one user count per replication.
    #[default]
    Slots,
    /// Direct draws from the conditional laws, a fresh user count per sample.
    Conditional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentationConfig {
    #[serde(default)]
    pub full_state: bool,
    #[serde(default)]
    pub min_residual: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub hi: f64,
    pub lo: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        let w = Window::default();
        Self { hi: w.hi, lo: w.lo }
    }
}

/// Reference slope written next to the fitted one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    LowerN,
    UpperN,
    Transient,
    Steady,
    Slotted,
    None,
}

impl ReferenceKind {
    pub fn bound_kind(self) -> Option<BoundKind> {
        match self {
            ReferenceKind::LowerN => Some(BoundKind::LowerN),
            ReferenceKind::UpperN => Some(BoundKind::UpperN),
            ReferenceKind::Transient => Some(BoundKind::TransientSlope),
            ReferenceKind::Steady => Some(BoundKind::SteadySlope),
            ReferenceKind::Slotted => Some(BoundKind::SlottedSlope),
            ReferenceKind::None => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct ExperimentConfig {
    pub engine: EngineKind,
    pub model: ModelConfig,
    pub replications: u64,
    /// Successes simulated per replication, warmup included.
    pub successes: u64,
    /// Leading successes of each replication left out of every output.
    pub warmup: u64,
    pub master_seed: u64,
    /// Experiment id mixed into every replicate's stream id.
    pub experiment: u64,
    pub instrumentation: InstrumentationConfig,
    /// Worker threads; `None` uses every available core.
    pub workers: Option<usize>,
    pub window: WindowConfig,
    pub fit_quantity: Quantity,
    pub sampler: SlottedSampler,
    /// Per-replication event budget of the finite engine.
    pub max_events: Option<u64>,
    /// `None` picks a default from the engine and stop rule.
    pub reference: Option<ReferenceKind>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    engine: EngineKind,
    model: serde_json::Value,
    replications: u64,
    successes: u64,
    #[serde(default)]
    warmup: u64,
    master_seed: u64,
    #[serde(default)]
    experiment: u64,
    #[serde(default)]
    instrumentation: InstrumentationConfig,
    #[serde(default)]
    workers: Option<usize>,
    #[serde(default)]
    window: WindowConfig,
    #[serde(default)]
    fit_quantity: Quantity,
    #[serde(default)]
    sampler: SlottedSampler,
    #[serde(default)]
    max_events: Option<u64>,
    #[serde(default)]
    reference: Option<ReferenceKind>,
}

impl TryFrom<RawConfig> for ExperimentConfig {
    type Error = String;

    fn try_from(raw: RawConfig) -> std::result::Result<Self, String> {
        let model = match raw.engine {
            EngineKind::Finite => serde_json::from_value(raw.model)
                .map(ModelConfig::Finite)
                .map_err(|e| format!("finite model: {e}"))?,
            EngineKind::Slotted => serde_json::from_value(raw.model)
                .map(ModelConfig::Slotted)
                .map_err(|e| format!("slotted model: {e}"))?,
        };
        Ok(Self {
            engine: raw.engine,
            model,
            replications: raw.replications,
            successes: raw.successes,
            warmup: raw.warmup,
            master_seed: raw.master_seed,
            experiment: raw.experiment,
            instrumentation: raw.instrumentation,
            workers: raw.workers,
            window: raw.window,
            fit_quantity: raw.fit_quantity,
            sampler: raw.sampler,
            max_events: raw.max_events,
            reference: raw.reference,
        })
    }
}

impl ExperimentConfig {
    /// A finite-engine config with defaults for everything but the model and sizes.
    pub fn finite(model: FiniteModelConfig, replications: u64, successes: u64, seed: u64) -> Self {
        Self::with_model(
            EngineKind::Finite,
            ModelConfig::Finite(model),
            replications,
            successes,
            seed,
        )
    }

    pub fn slotted(
        model: SlottedModelConfig,
        replications: u64,
        successes: u64,
        seed: u64,
    ) -> Self {
        Self::with_model(
            EngineKind::Slotted,
            ModelConfig::Slotted(model),
            replications,
            successes,
            seed,
        )
    }

    fn with_model(
        engine: EngineKind,
        model: ModelConfig,
        replications: u64,
        successes: u64,
        master_seed: u64,
    ) -> Self {
        Self {
            engine,
            model,
            replications,
            successes,
            warmup: 0,
            master_seed,
            experiment: 0,
            instrumentation: InstrumentationConfig::default(),
            workers: None,
            window: WindowConfig::default(),
            fit_quantity: Quantity::T,
            sampler: SlottedSampler::default(),
            max_events: None,
            reference: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| AppError::config(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn window(&self) -> Result<Window> {
        Ok(Window::new(self.window.hi, self.window.lo)?)
    }

    pub fn core_instrumentation(&self) -> Instrumentation {
        Instrumentation {
            full_state: self.instrumentation.full_state,
            min_residual: self.instrumentation.min_residual,
            event_log: false,
        }
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(AppError::config("replications must be >= 1"));
        }
        if self.successes == 0 {
            return Err(AppError::config("successes must be >= 1"));
        }
        if self.warmup >= self.successes {
            return Err(AppError::config("warmup must be smaller than successes"));
        }
        if self.workers == Some(0) {
            return Err(AppError::config("workers must be >= 1"));
        }
        if self.max_events == Some(0) {
            return Err(AppError::config("max_events must be >= 1"));
        }
        self.window()?;
        match (&self.engine, &self.model) {
            (EngineKind::Finite, ModelConfig::Finite(m)) => {
                let params = m.build()?;
                let inst = self.instrumentation;
                if params.users() < 2 && (inst.full_state || inst.min_residual) {
                    return Err(AppError::config(
                        "full_state and min_residual instrumentation need M >= 2",
                    ));
                }
                match self.fit_quantity {
                    Quantity::Nf if !inst.full_state => {
                        return Err(AppError::config(
                            "fit_quantity Nf needs full_state instrumentation",
                        ))
                    }
                    Quantity::Lmin if !inst.min_residual => {
                        return Err(AppError::config(
                            "fit_quantity Lmin needs min_residual instrumentation",
                        ))
                    }
                    _ => {}
                }
            }
            (EngineKind::Slotted, ModelConfig::Slotted(m)) => {
                let params = m.build()?;
                if self.instrumentation != InstrumentationConfig::default() {
                    return Err(AppError::config(
                        "the slotted engine has no instrumentation",
                    ));
                }
                if matches!(self.fit_quantity, Quantity::Nf | Quantity::Lmin) {
                    return Err(AppError::config("slotted fit_quantity must be T or N"));
                }
                if self.sampler == SlottedSampler::Conditional && !params.rates_equal() {
                    return Err(AppError::config(
                        "the conditional sampler needs lambda == nu",
                    ));
                }
            }
            _ => return Err(AppError::config("model does not match engine")),
        }
        Ok(())
    }

    /// The reference slope kind used when none is configured.
    pub fn effective_reference(&self) -> ReferenceKind {
        if let Some(r) = self.reference {
            return r;
        }
        match (self.engine, self.fit_quantity) {
            (EngineKind::Slotted, _) => ReferenceKind::Slotted,
            (EngineKind::Finite, Quantity::T | Quantity::N) => {
                if self.successes == 1 && self.warmup == 0 {
                    ReferenceKind::Transient
                } else {
                    ReferenceKind::Steady
                }
            }
            _ => ReferenceKind::None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tagged_distributions() {
        let c = ExperimentConfig::from_json(
            r#"{"engine":"slotted","model":{"nu":0.6931,"users":{"type":"geometric","mean":3,"support_min":1,"cap":14}},
                "replications":2,"successes":10,"master_seed":1,"sampler":"conditional"}"#,
        )
        .unwrap();
        let ModelConfig::Slotted(m) = c.model else {
            panic!()
        };
        assert_eq!(
            m.users.build().unwrap(),
            UserCountDistribution::truncated_geometric(3.0, 14).unwrap()
        );
        assert_eq!(c.effective_reference(), ReferenceKind::Slotted);
    }

    #[test]
    fn rejects_inconsistent_configs() {
        let base = r#"{"engine":"finite","model":{"M":2,"lambda":1,"nu":1,"packet":{"type":"exponential","rate":1}},
                       "replications":1,"successes":10,"master_seed":1"#;
        assert!(ExperimentConfig::from_json(&format!("{base}}}")).is_ok());
        for extra in [
            r#","warmup":10"#,
            r#","fit_quantity":"Nf""#,
            r#","bogus":1"#,
            r#","workers":0"#,
        ] {
            let err = ExperimentConfig::from_json(&format!("{base}{extra}}}")).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{extra}: {err}");
        }
        let err = ExperimentConfig::from_json(
            &base
                .replace(r#""rate":1"#, r#""rate":-1"#)
                .replace("seed\":1", "seed\":1}"),
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn round_trips_through_json() {
        let mut c = ExperimentConfig::finite(
            FiniteModelConfig {
                users: 3,
                lambda: 2.0 / 3.0,
                nu: 2.0 / 3.0,
                packet: PacketSpec::Gamma {
                    shape: 2.0,
                    rate: 1.0,
                },
            },
            4,
            100,
            9,
        );
        c.warmup = 10;
        c.instrumentation.full_state = true;
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
        assert_eq!(c.effective_reference(), ReferenceKind::Steady);
    }
}
