//! JSON representation of a scenario.
//!
//! Units in the file are the ones people write down: degrees, dBm, dB and
//! dBsm. [`ScenarioFile::into_config`] converts them to radians and linear
//! SI quantities. Every field is optional and defaults to the reference
//! two-target setup (28 GHz, 400 × 60 grid at 120 kHz, 20 dBm, 8-element
//! ULA steered to 10°).

use serde::{Deserialize, Serialize};

use super::{db_to_linear, dbm_to_watts, ScenarioConfig, TargetSpec, WaveformConfig};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub carrier_frequency_hz: f64,
    pub subcarrier_spacing_hz: f64,
    pub subcarriers: usize,
    pub symbols: usize,
    pub cp_fraction: f64,
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub noise_figure_db: f64,
    pub tx_elements: usize,
    pub element_spacing_wavelengths: f64,
    pub beam_angle_deg: f64,
    pub tx_position_m: [f64; 2],
    pub rx_position_m: [f64; 2],
    pub path_phase_seed: Option<u64>,
    pub targets: Vec<TargetFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetFile {
    pub position_m: [f64; 2],
    #[serde(default)]
    pub velocity_mps: [f64; 2],
    pub rcs_dbsm: f64,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        Self {
            carrier_frequency_hz: 28e9,
            subcarrier_spacing_hz: 120e3,
            subcarriers: 400,
            symbols: 60,
            cp_fraction: 0.07,
            tx_power_dbm: 20.0,
            noise_psd_dbm_per_hz: -174.0,
            noise_figure_db: 8.0,
            tx_elements: 8,
            element_spacing_wavelengths: 0.5,
            beam_angle_deg: 10.0,
            tx_position_m: [0.0, 0.0],
            rx_position_m: [50.0, 0.0],
            path_phase_seed: None,
            targets: vec![
                TargetFile {
                    position_m: [56.9, 10.0],
                    velocity_mps: [1.4, -2.2],
                    rcs_dbsm: 4.9,
                },
                TargetFile {
                    position_m: [79.4, 7.0],
                    velocity_mps: [2.2, -13.7],
                    rcs_dbsm: 1.5,
                },
            ],
        }
    }
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub(super) fn waveform(&self) -> WaveformConfig {
        WaveformConfig {
            carrier_hz: self.carrier_frequency_hz,
            subcarrier_spacing_hz: self.subcarrier_spacing_hz,
            subcarriers: self.subcarriers,
            symbols: self.symbols,
            cp_fraction: self.cp_fraction,
            tx_power_w: dbm_to_watts(self.tx_power_dbm),
            noise_psd_w_per_hz: dbm_to_watts(self.noise_psd_dbm_per_hz),
            noise_figure: db_to_linear(self.noise_figure_db),
            tx_elements: self.tx_elements,
        }
    }

    pub fn into_config(&self) -> Result<ScenarioConfig> {
        let cfg = ScenarioConfig {
            waveform: self.waveform(),
            tx_position: self.tx_position_m,
            rx_position: self.rx_position_m,
            beam_angle_rad: self.beam_angle_deg.to_radians(),
            targets: self
                .targets
                .iter()
                .map(|t| TargetSpec {
                    position: t.position_m,
                    velocity: t.velocity_mps,
                    rcs_m2: db_to_linear(t.rcs_dbsm),
                })
                .collect(),
            element_spacing_wavelengths: self.element_spacing_wavelengths,
            path_phase_seed: self.path_phase_seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
