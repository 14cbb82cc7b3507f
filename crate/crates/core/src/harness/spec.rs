use std::fmt;

use serde::{Deserialize, Serialize};

use crate::detect::CfarConfig;
use crate::ofdm::Modulation;
use crate::receiver::{Estimator, Feedback, GainFit, Scheme, SnrSource};
use crate::scenario::ScenarioFile;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RcsSweep,
    PilotSweep,
    Tradeoff,
    IterationStudy,
    RangeProfile,
    SingleRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// RCS of `sweep.target` in dBsm.
    RcsDbsm,
    PilotPercent,
    TxPowerDbm,
    /// A single point with no swept parameter.
    None,
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVariable::RcsDbsm => "rcs_dbsm",
            SweepVariable::PilotPercent => "pilot_percent",
            SweepVariable::TxPowerDbm => "tx_power_dbm",
            SweepVariable::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    #[serde(default)]
    pub values: Vec<f64>,
    /// Target (1-based) whose RCS is swept. Defaults to the scored target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            variable: SweepVariable::None,
            values: Vec::new(),
            target: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverOptions {
    pub max_iterations: usize,
    pub feedback: Feedback,
    pub gain_fit: GainFit,
    pub snr_source: SnrSource,
}

impl Default for ReceiverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2,
            feedback: Feedback::Hard,
            gain_fit: GainFit::Support,
            snr_source: SnrSource::Truth,
        }
    }
}

/// A Monte Carlo experiment, as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub scenario: ScenarioFile,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    /// Stage-3 estimators of the data-aided scheme.
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default = "default_modulations")]
    pub modulations: Vec<Modulation>,
    #[serde(default = "default_pilot_percent")]
    pub pilot_percent: f64,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Seed of the pilot placement and pilot symbols. Defaults to `master_seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pilot_seed: Option<u64>,
    /// Seed of the fixed data payload. Defaults to `master_seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
    /// Draw fresh payload bits in every trial.
    #[serde(default)]
    pub redraw_data: bool,
    #[serde(default)]
    pub receiver: ReceiverOptions,
    #[serde(default)]
    pub cfar: CfarConfig,
    /// Path index scored for Pd: 0 is the line of sight, k is target k.
    #[serde(default = "default_scored_target")]
    pub scored_target: usize,
    /// Association gate in bins.
    #[serde(default = "default_gate")]
    pub gate: usize,
    #[serde(default = "default_mi_samples")]
    pub mi_samples: usize,
    /// Write grid dumps and peak lists for trial 0 (single runs only).
    #[serde(default)]
    pub dump: bool,
}

fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::PilotOnly, Scheme::DataAided, Scheme::Genie]
}

fn default_estimators() -> Vec<Estimator> {
    vec![Estimator::Lmmse]
}

fn default_modulations() -> Vec<Modulation> {
    vec![Modulation::Qpsk]
}

fn default_pilot_percent() -> f64 {
    5.0
}

fn default_trials() -> usize {
    200
}

fn default_scored_target() -> usize {
    2
}

fn default_gate() -> usize {
    1
}

fn default_mi_samples() -> usize {
    20_000
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Minimal spec of the given kind with every default filled in.
    pub fn new(kind: ExperimentKind) -> Self {
        serde_json::from_value(serde_json::json!({ "kind": kind })).expect("defaults deserialize")
    }

    pub fn pilot_seed(&self) -> u64 {
        self.pilot_seed.unwrap_or(self.master_seed)
    }

    pub fn data_seed(&self) -> u64 {
        self.data_seed.unwrap_or(self.master_seed)
    }

    /// The target whose RCS a `rcs_dbsm` sweep changes.
    pub fn swept_target(&self) -> usize {
        self.sweep.target.unwrap_or(self.scored_target)
    }

    /// Sweep values, or a single dummy point when nothing is swept.
    pub fn points(&self) -> Vec<f64> {
        if self.sweep.variable == SweepVariable::None {
            vec![0.0]
        } else {
            self.sweep.values.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let scenario = self.scenario.into_config()?;
        let sweep = |msg: String| Err(Error::Sweep(msg));
        let required = match self.kind {
            ExperimentKind::RcsSweep => Some(SweepVariable::RcsDbsm),
            ExperimentKind::PilotSweep | ExperimentKind::Tradeoff => Some(SweepVariable::PilotPercent),
            _ => None,
        };
        if let Some(var) = required {
            if self.sweep.variable != var {
                return sweep(format!("{:?} experiments sweep {var}, not {}", self.kind, self.sweep.variable));
            }
        }
        if self.sweep.variable != SweepVariable::None && self.sweep.values.is_empty() {
            return sweep("sweep grid is empty".into());
        }
        if self.sweep.values.iter().any(|v| !v.is_finite()) {
            return sweep("sweep values must be finite".into());
        }
        if self.sweep.variable == SweepVariable::PilotPercent && self.sweep.values.iter().any(|v| !(0.0..=100.0).contains(v)) {
            return sweep("pilot percentages must lie in [0, 100]".into());
        }
        if self.sweep.variable == SweepVariable::RcsDbsm {
            let t = self.swept_target();
            if t == 0 || t > scenario.targets.len() {
                return sweep(format!("swept target {t} does not exist"));
            }
        }
        if self.sweep.variable != SweepVariable::RcsDbsm && self.sweep.target.is_some() {
            return sweep("sweep.target only applies to rcs_dbsm sweeps".into());
        }
        if self.n_trials == 0 {
            return Err(Error::config("n_trials must be at least 1"));
        }
        if self.schemes.is_empty() || self.modulations.is_empty() {
            return Err(Error::config("schemes and modulations must be non-empty"));
        }
        if self.schemes.contains(&Scheme::DataAided) && self.estimators.is_empty() {
            return Err(Error::config("data-aided scheme needs at least one estimator"));
        }
        if self.schemes.contains(&Scheme::DataAided) && self.receiver.max_iterations == 0 {
            return Err(Error::config("receiver.max_iterations must be at least 1"));
        }
        if !(0.0..=100.0).contains(&self.pilot_percent) {
            return Err(Error::config("pilot_percent must lie in [0, 100]"));
        }
        if self.scored_target > scenario.targets.len() {
            return Err(Error::config(format!("scored target {} does not exist", self.scored_target)));
        }
        if self.mi_samples == 0 {
            return Err(Error::config("mi_samples must be at least 1"));
        }
        self.cfar.validate()
    }
}
