//! Experiment configuration: JSON documents, CLI overrides, validation.
//!
//! A config names a target, the dynamics/method pair, and exactly one of a
//! `schedule` (accuracy-driven parameter selection) or an `explicit`
//! parameter set. The effective config is echoed into every report so that a
//! run can be reproduced from its output alone.

use crate::metrics::Estimator;
use crate::potential::{
    make_logistic, make_quadratic, GaussianTarget, LogisticData, PotentialSpec,
};
use crate::samplers::{
    euler_step_size, overdamped_schedule, underdamped_schedule, Dynamics, Method, SamplerConfig,
    ScheduleInputs,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("config parse failure: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("target construction failure: {0}")]
    Target(#[from] crate::potential::PotentialError),
    #[error("schedule failure: {0}")]
    Schedule(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TargetConfig {
    /// Diagonal-precision Gaussian target.
    Quadratic { precision: Vec<f64>, mean: Vec<f64> },
    /// Ridge-regularized logistic potential over synthetic data.
    Logistic {
        alpha: f64,
        n: usize,
        dim: usize,
        data_seed: u64,
        /// When set, data is loaded from this CSV if it exists and dumped to
        /// it otherwise.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data_path: Option<String>,
    },
}

impl TargetConfig {
    /// Builds the potential; for Gaussian targets also returns the exact
    /// stationary law.
    pub fn build(&self) -> Result<(PotentialSpec, Option<GaussianTarget>), ConfigError> {
        match self {
            TargetConfig::Quadratic { precision, mean } => {
                let target = GaussianTarget::new(precision.clone(), mean.clone())?;
                Ok((make_quadratic(precision, mean)?, Some(target)))
            }
            TargetConfig::Logistic {
                alpha,
                n,
                dim,
                data_seed,
                data_path,
            } => {
                let data = match data_path {
                    Some(path) if std::path::Path::new(path).exists() => {
                        LogisticData::from_csv(&std::fs::read_to_string(path)?)
                            .map_err(ConfigError::Target)?
                    }
                    Some(path) => {
                        let data = LogisticData::synthetic(*n, *dim, *data_seed)?;
                        std::fs::write(path, data.to_csv())?;
                        data
                    }
                    None => LogisticData::synthetic(*n, *dim, *data_seed)?,
                };
                Ok((make_logistic(*alpha, &data)?, None))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScheduleConfig {
    pub epsilon: f64,
    #[serde(default)]
    pub p: u32,
    #[serde(default = "one")]
    pub c1: f64,
    #[serde(default = "one")]
    pub c2: f64,
    #[serde(default = "one")]
    pub c3: f64,
    #[serde(default = "one")]
    pub c4: f64,
    #[serde(default = "two")]
    pub gamma_multiplier: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExplicitConfig {
    pub eta: f64,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub n_batches: usize,
}

/// Sweep-only knobs: chains start at the stationary law shifted by a mean
/// offset with ‖offset‖² = init_ratio · ε²d/α, so the first-passage time is
/// governed by a fixed contraction budget across accuracies.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepSettings {
    #[serde(default = "default_init_ratio")]
    pub init_ratio: f64,
    /// Batch budget as a multiple of the scheduled N before a row is flagged
    /// as non-attained.
    #[serde(default = "default_budget_multiplier")]
    pub budget_multiplier: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            init_ratio: default_init_ratio(),
            budget_multiplier: default_budget_multiplier(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn default_init_ratio() -> f64 {
    25.0
}
fn default_budget_multiplier() -> f64 {
    3.0
}
fn default_chains() -> usize {
    1000
}
fn default_estimators() -> Vec<Estimator> {
    vec![Estimator::GaussianMoment]
}
fn default_sliced_directions() -> usize {
    64
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub target: TargetConfig,
    pub dynamics: Dynamics,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit: Option<ExplicitConfig>,
    #[serde(default = "default_chains")]
    pub n_chains: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default = "default_sliced_directions")]
    pub sliced_directions: usize,
    #[serde(default)]
    pub sweep: SweepSettings,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match (&self.schedule, &self.explicit) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid(
                    "config carries both a schedule and explicit parameters".into(),
                ))
            }
            (None, None) => {
                return Err(ConfigError::Invalid(
                    "config needs a schedule or explicit parameters".into(),
                ))
            }
            _ => {}
        }
        if self.n_chains == 0 {
            return Err(ConfigError::Invalid("n_chains must be >= 1".into()));
        }
        if self.sweep.init_ratio <= 1.0 {
            return Err(ConfigError::Invalid(
                "sweep init_ratio must exceed 1".into(),
            ));
        }
        Ok(())
    }

    fn schedule_inputs(&self, spec: &PotentialSpec, epsilon: f64) -> ScheduleInputs {
        let s = self.schedule.unwrap_or(ScheduleConfig {
            epsilon,
            p: 0,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            gamma_multiplier: 2.0,
        });
        ScheduleInputs {
            epsilon,
            alpha: spec.alpha(),
            ell: spec.ell(),
            dim: spec.dim(),
            p: s.p,
            c1: s.c1,
            c2: s.c2,
            c3: s.c3,
            c4: s.c4,
            gamma_multiplier: s.gamma_multiplier,
        }
    }

    /// Resolves the sampler parameters at the given accuracy (which must be
    /// the schedule's epsilon unless overridden by a sweep).
    pub fn resolve(
        &self,
        spec: &PotentialSpec,
        epsilon: Option<f64>,
    ) -> Result<SamplerConfig, ConfigError> {
        if let Some(explicit) = &self.explicit {
            let k = match self.method {
                Method::Euler => 1,
                Method::Poisson => explicit.k.max(1),
            };
            let gamma = match self.dynamics {
                Dynamics::Underdamped => Some(explicit.gamma.unwrap_or(2.0 * spec.ell().sqrt())),
                Dynamics::Overdamped => None,
            };
            return Ok(SamplerConfig {
                dynamics: self.dynamics,
                method: self.method,
                eta: explicit.eta,
                k,
                gamma,
                n_batches: explicit.n_batches,
                inner_step: explicit.eta / k as f64,
                requested_inner_step: explicit.eta / k as f64,
            });
        }
        let eps = epsilon
            .or(self.schedule.map(|s| s.epsilon))
            .ok_or_else(|| ConfigError::Invalid("no accuracy target available".into()))?;
        let inputs = self.schedule_inputs(spec, eps);
        match self.method {
            Method::Poisson => {
                let cfg = match self.dynamics {
                    Dynamics::Overdamped => overdamped_schedule(&inputs),
                    Dynamics::Underdamped => underdamped_schedule(&inputs),
                }
                .map_err(|e| ConfigError::Schedule(e.to_string()))?;
                Ok(cfg)
            }
            Method::Euler => {
                let h = euler_step_size(self.dynamics, &inputs);
                let gamma = match self.dynamics {
                    Dynamics::Underdamped => Some(inputs.gamma_multiplier * spec.ell().sqrt()),
                    Dynamics::Overdamped => None,
                };
                // Mixing-time budget of the Euler baseline at this accuracy:
                // enough steps to contract a Θ(d/α) initial error below the
                // ε²d/α threshold.
                let ratio: f64 = (2.0 / (eps * eps)).max(2.0);
                let n = match self.dynamics {
                    Dynamics::Overdamped => (ratio.ln() / (spec.alpha() * h)).ceil(),
                    Dynamics::Underdamped => {
                        (gamma.unwrap() * ratio.ln() / (spec.alpha() * h)).ceil()
                    }
                };
                Ok(SamplerConfig {
                    dynamics: self.dynamics,
                    method: Method::Euler,
                    eta: h,
                    k: 1,
                    gamma,
                    n_batches: n as usize,
                    inner_step: h,
                    requested_inner_step: h,
                })
            }
        }
    }
}
