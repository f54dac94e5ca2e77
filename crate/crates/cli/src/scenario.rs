//! TOML scenario files for `safelane simulate`.
//!
//! ```toml
//! model = "m1"              # m1..m5, m3-wrong
//! threshold = "as-written"  # Model 5 only; or "sign-corrected"
//! relaxed = false
//! seed = 0
//! stream = 0
//!
//! [params]
//! a_n_max = 2.0
//! a_n_min = 3.0
//! a_s_min = 5.0
//! period = 0.1
//!
//! [initial]
//! x = 0.0
//! v = 0.0
//!
//! [constraint]
//! policy = "fixed"          # or "resample"
//! x_c = 28.0
//! v_c = 0.0
//!
//! [nominal]
//! policy = "constant"       # "random", "constant" or "schedule"
//! value = 2.0
//! # steps = [[0.0, 2.0], [3.0, -1.0]]   for "schedule"
//!
//! [budget]
//! iterations = 600
//! dense_samples = 20
//! duration = "always-t"     # or "sampled"
//! monitor = "dense"         # or "end-step"
//! ```

use serde::{Deserialize, Serialize};

use safelane_core::controller::{Controller, SafetyConstraint};
use safelane_core::kinematics::VehicleState;
use safelane_core::simulator::{ConstraintPolicy, DurationPolicy, EpisodeConfig, MonitorMode, NominalPolicy};
use safelane_core::{ModelId, SystemParams, ThresholdVariant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<String>,
    #[serde(default)]
    pub relaxed: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
    pub params: ParamsSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub constraint: ConstraintSection,
    #[serde(default)]
    pub nominal: NominalSection,
    #[serde(default)]
    pub budget: BudgetSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub a_n_max: f64,
    pub a_n_min: f64,
    pub a_s_min: f64,
    pub period: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConstraintSection {
    #[default]
    Resample,
    Fixed {
        x_c: f64,
        #[serde(default)]
        v_c: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NominalSection {
    #[default]
    Random,
    Constant {
        value: f64,
    },
    Schedule {
        steps: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DurationName {
    #[default]
    Sampled,
    AlwaysT,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MonitorName {
    #[default]
    Dense,
    EndStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_dense")]
    pub dense_samples: usize,
    #[serde(default)]
    pub duration: DurationName,
    #[serde(default)]
    pub monitor: MonitorName,
}

fn default_iterations() -> usize {
    50
}

fn default_dense() -> usize {
    20
}

impl Default for BudgetSection {
    fn default() -> Self {
        Self {
            iterations: default_iterations(),
            dense_samples: default_dense(),
            duration: DurationName::default(),
            monitor: MonitorName::default(),
        }
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Episode configuration; validation of values is left to the simulator.
    pub fn to_config(&self) -> Result<EpisodeConfig, String> {
        let model: ModelId = self.model.parse()?;
        let threshold = match &self.threshold {
            Some(t) => t.parse::<ThresholdVariant>()?,
            None => ThresholdVariant::default(),
        };
        let p = self.params;
        let params = SystemParams { a_n_max: p.a_n_max, a_n_min: p.a_n_min, a_s_min: p.a_s_min, period: p.period };
        Ok(EpisodeConfig {
            controller: Controller::with_threshold(model, threshold),
            relaxed: self.relaxed,
            params,
            initial: VehicleState::new(self.initial.x, self.initial.v),
            iterations: self.budget.iterations,
            dense_samples: self.budget.dense_samples,
            duration: match self.budget.duration {
                DurationName::Sampled => DurationPolicy::Sampled,
                DurationName::AlwaysT => DurationPolicy::AlwaysT,
            },
            constraint: match self.constraint {
                ConstraintSection::Resample => ConstraintPolicy::Resample,
                ConstraintSection::Fixed { x_c, v_c } => ConstraintPolicy::Fixed(SafetyConstraint::new(x_c, v_c)),
            },
            nominal: match &self.nominal {
                NominalSection::Random => NominalPolicy::Random,
                NominalSection::Constant { value } => NominalPolicy::Constant(*value),
                NominalSection::Schedule { steps } => NominalPolicy::Schedule(steps.clone()),
            },
            monitor: match self.budget.monitor {
                MonitorName::Dense => MonitorMode::Dense,
                MonitorName::EndStep => MonitorMode::EndStep,
            },
            seed: self.seed,
            stream: self.stream,
        })
    }

    /// Scenario reproducing `cfg` exactly.
    pub fn from_config(cfg: &EpisodeConfig) -> Self {
        let p = cfg.params;
        Self {
            model: cfg.controller.model.to_string(),
            threshold: Some(cfg.controller.threshold.to_string()),
            relaxed: cfg.relaxed,
            seed: cfg.seed,
            stream: cfg.stream,
            params: ParamsSection { a_n_max: p.a_n_max, a_n_min: p.a_n_min, a_s_min: p.a_s_min, period: p.period },
            initial: InitialSection { x: cfg.initial.x, v: cfg.initial.v },
            constraint: match cfg.constraint {
                ConstraintPolicy::Resample => ConstraintSection::Resample,
                ConstraintPolicy::Fixed(c) => ConstraintSection::Fixed { x_c: c.x_c, v_c: c.v_c },
            },
            nominal: match &cfg.nominal {
                NominalPolicy::Random => NominalSection::Random,
                NominalPolicy::Constant(a) => NominalSection::Constant { value: *a },
                NominalPolicy::Schedule(s) => NominalSection::Schedule { steps: s.clone() },
            },
            budget: BudgetSection {
                iterations: cfg.iterations,
                dense_samples: cfg.dense_samples,
                duration: match cfg.duration {
                    DurationPolicy::Sampled => DurationName::Sampled,
                    DurationPolicy::AlwaysT => DurationName::AlwaysT,
                },
                monitor: match cfg.monitor {
                    MonitorMode::Dense => MonitorName::Dense,
                    MonitorMode::EndStep => MonitorName::EndStep,
                },
            },
        }
    }
}
