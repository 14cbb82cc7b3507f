//! Physical scenario, waveform numerology and ground-truth path synthesis.
//!
//! Geometry is two-dimensional. The transmitter is a uniform linear array
//! with a fixed beamformer; its array gain toward each path is folded into
//! the complex path gain.

mod file;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::seed;
use crate::{Error, Result};

pub use file::{ScenarioFile, TargetFile};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type Vec2 = [f64; 2];

fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm) * 1e-3
}

/// OFDM numerology plus the power and noise budget.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformConfig {
    pub carrier_hz: f64,
    pub subcarrier_spacing_hz: f64,
    /// Subcarrier count `N`.
    pub subcarriers: usize,
    /// OFDM symbol count `M`.
    pub symbols: usize,
    /// Cyclic prefix length as a fraction of the elementary symbol.
    pub cp_fraction: f64,
    pub tx_power_w: f64,
    pub noise_psd_w_per_hz: f64,
    /// Linear noise figure (not dB).
    pub noise_figure: f64,
    pub tx_elements: usize,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        ScenarioFile::default().waveform()
    }
}

impl WaveformConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier frequency", self.carrier_hz),
            ("subcarrier spacing", self.subcarrier_spacing_hz),
            ("transmit power", self.tx_power_w),
            ("noise PSD", self.noise_psd_w_per_hz),
            ("noise figure", self.noise_figure),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.cp_fraction.is_finite() && self.cp_fraction >= 0.0) {
            return Err(Error::config(format!(
                "cyclic prefix fraction must be non-negative, got {}",
                self.cp_fraction
            )));
        }
        if self.subcarriers == 0 || self.symbols == 0 || self.tx_elements == 0 {
            return Err(Error::config(
                "subcarrier, symbol and antenna counts must be at least 1",
            ));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Elementary symbol duration `T = 1/Δf`.
    pub fn elementary_duration(&self) -> f64 {
        1.0 / self.subcarrier_spacing_hz
    }

    pub fn cp_duration(&self) -> f64 {
        self.cp_fraction / self.subcarrier_spacing_hz
    }

    /// Total symbol duration `T_sym = T_cp + T`.
    pub fn symbol_duration(&self) -> f64 {
        self.cp_duration() + self.elementary_duration()
    }

    pub fn bandwidth(&self) -> f64 {
        self.subcarriers as f64 * self.subcarrier_spacing_hz
    }

    /// Delay spacing of one delay-Doppler bin, `1/(NΔf)`.
    pub fn delay_resolution(&self) -> f64 {
        1.0 / self.bandwidth()
    }

    /// Doppler spacing of one delay-Doppler bin, `1/(M T_sym)`.
    pub fn doppler_resolution(&self) -> f64 {
        1.0 / (self.symbols as f64 * self.symbol_duration())
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        (self.subcarriers, self.symbols)
    }
}

/// Per-entry noise variance `σ² = N₀ · N · Δf · N_F`.
pub fn noise_variance(cfg: &WaveformConfig) -> f64 {
    cfg.noise_psd_w_per_hz * cfg.bandwidth() * cfg.noise_figure
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    pub position: Vec2,
    pub velocity: Vec2,
    /// Bistatic radar cross section in m² (linear).
    pub rcs_m2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub waveform: WaveformConfig,
    pub tx_position: Vec2,
    pub rx_position: Vec2,
    /// Boresight-relative steering angle of the fixed TX beam, radians.
    pub beam_angle_rad: f64,
    pub targets: Vec<TargetSpec>,
    pub element_spacing_wavelengths: f64,
    /// When set, every path gain gets an i.i.d. uniform phase drawn from this seed.
    pub path_phase_seed: Option<u64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioFile::default()
            .into_config()
            .expect("built-in scenario is valid")
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.waveform.validate()?;
        if self.tx_position == self.rx_position {
            return Err(Error::config("transmitter and receiver are co-located"));
        }
        if !(self.element_spacing_wavelengths.is_finite() && self.element_spacing_wavelengths > 0.0)
        {
            return Err(Error::config("element spacing must be positive"));
        }
        for (k, t) in self.targets.iter().enumerate() {
            if !(t.rcs_m2.is_finite() && t.rcs_m2 > 0.0) {
                return Err(Error::config(format!("target {} has non-positive RCS", k + 1)));
            }
            if t.position == self.tx_position || t.position == self.rx_position {
                return Err(Error::config(format!(
                    "target {} coincides with the transmitter or receiver",
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

/// One propagation path. Index 0 of a [`PathSet`] is the line of sight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    /// Complex gain including the TX array factor.
    pub gain: Complex64,
    pub delay_s: f64,
    pub doppler_hz: f64,
    /// Angle of departure from array boresight, radians.
    pub aod_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathSet {
    pub paths: Vec<Path>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn los(&self) -> Option<&Path> {
        self.paths.first()
    }

    /// `Σ_k |α_k|²`.
    pub fn total_power(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }

    pub fn delay_spread(&self) -> f64 {
        let (lo, hi) = self
            .paths
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.delay_s), hi.max(p.delay_s))
            });
        if self.paths.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }
}

/// TX array response toward `theta` under the fixed beamformer,
/// `g(θ) = a_Tᵀ(θ) f_T` with `f_T = √(P_T/N_T) a_T*(beam)`.
pub fn array_factor(cfg: &ScenarioConfig, theta_rad: f64) -> Complex64 {
    let wf = &cfg.waveform;
    let amplitude = (wf.tx_power_w / wf.tx_elements as f64).sqrt();
    let step = 2.0 * PI * cfg.element_spacing_wavelengths * (theta_rad.sin() - cfg.beam_angle_rad.sin());
    let sum: Complex64 = (0..wf.tx_elements)
        .map(|i| Complex64::from_polar(1.0, step * i as f64))
        .sum();
    sum * amplitude
}

fn aod(from: Vec2, to: Vec2) -> f64 {
    (to[1] - from[1]).atan2(to[0] - from[0])
}

/// Converts the geometry into per-path gains, delays, Dopplers and AODs.
pub fn derive_paths(cfg: &ScenarioConfig) -> Result<PathSet> {
    cfg.validate()?;
    let wf = &cfg.waveform;
    let lambda = wf.wavelength();

    let los_vec = sub(cfg.rx_position, cfg.tx_position);
    let d0 = norm(los_vec);
    if d0 == 0.0 {
        return Err(Error::config("zero line-of-sight distance"));
    }
    let theta0 = aod(cfg.tx_position, cfg.rx_position);
    let mut paths = Vec::with_capacity(cfg.targets.len() + 1);
    paths.push(Path {
        gain: array_factor(cfg, theta0) * (lambda / (4.0 * PI * d0)),
        delay_s: d0 / SPEED_OF_LIGHT,
        doppler_hz: 0.0,
        aod_rad: theta0,
    });

    let radar_const = (4.0 * PI).powf(1.5);
    for (k, t) in cfg.targets.iter().enumerate() {
        let to_target = sub(t.position, cfg.tx_position);
        let from_rx = sub(t.position, cfg.rx_position);
        let d1 = norm(to_target);
        let d2 = norm(from_rx);
        if d1 == 0.0 || d2 == 0.0 {
            return Err(Error::config(format!("target {} has a zero-length leg", k + 1)));
        }
        // Rate of change of the bistatic path length d1 + d2.
        let range_rate = dot(t.velocity, to_target) / d1 + dot(t.velocity, from_rx) / d2;
        let theta = aod(cfg.tx_position, t.position);
        let magnitude = lambda * t.rcs_m2.sqrt() / (radar_const * d1 * d2);
        paths.push(Path {
            gain: array_factor(cfg, theta) * magnitude,
            delay_s: (d1 + d2) / SPEED_OF_LIGHT,
            doppler_hz: -range_rate / lambda,
            aod_rad: theta,
        });
    }

    if let Some(phase_seed) = cfg.path_phase_seed {
        let mut rng = seed::rng(seed::derive(phase_seed, seed::Stream::PathPhase, 0));
        for p in &mut paths {
            let phi = rng.random_range(0.0..2.0 * PI);
            p.gain *= Complex64::from_polar(1.0, phi);
        }
    }

    let set = PathSet { paths };
    let spread = set.delay_spread();
    if spread > wf.cp_duration() {
        return Err(Error::config(format!(
            "delay spread {:.3e} s exceeds the cyclic prefix {:.3e} s",
            spread,
            wf.cp_duration()
        )));
    }
    Ok(set)
}
