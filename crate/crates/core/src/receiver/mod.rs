//! The multi-stage data-aided receiver and its pilot-only and genie-aided
//! benchmarks.
//!
//! Stage 1 estimates the channel on the pilot cells, images it in
//! delay-Doppler, detects peaks and fits path gains to build a full-grid
//! reconstruction. Stages 2 and 3 alternate LMMSE demodulation with
//! data-aided channel refinement. Stage 4 runs detection on the final
//! estimate.

mod stages;
mod transform;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use stages::{
    dedupe_bins, lmmse_demod, ls_gains, reconstruct_channel, refine_channel, stage1_pilot_estimate,
};
pub use transform::DelayDopplerTransform;

use crate::channel::RxFrame;
use crate::detect::{cfar_2d, CfarConfig, DetectionList};
use crate::ofdm::{PilotPattern, TxFrame};
use crate::{ComplexGrid, Error, RealGrid, Result};

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.name() == s)
                    .ok_or_else(|| Error::config(format!("unknown {} {s:?}", stringify!($name))))
            }
        }
    };
}

named_enum! {
    /// Stage-3 channel estimator on the data cells.
    Estimator { Rf => "rf", Mf => "mf", Lmmse => "lmmse" }
}

named_enum! {
    Scheme { PilotOnly => "pilot_only", DataAided => "data_aided", Genie => "genie" }
}

named_enum! {
    /// What Stage 3 divides by: sliced constellation points or raw LMMSE outputs.
    Feedback { Hard => "hard", Soft => "soft" }
}

named_enum! {
    /// Cells used by the least-squares gain fit.
    GainFit { Support => "support", FullGrid => "full_grid" }
}

named_enum! {
    /// Where the SNRs of the regularised estimators come from.
    SnrSource { Truth => "truth", Estimated => "estimated" }
}

/// Cells of an estimate that carry observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Pilots,
    Full,
}

#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    pub h_hat: ComplexGrid,
    pub pilots: Arc<PilotPattern>,
    pub support: Support,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverConfig {
    pub scheme: Scheme,
    pub estimator: Estimator,
    pub max_iterations: usize,
    pub feedback: Feedback,
    pub gain_fit: GainFit,
    pub snr_source: SnrSource,
    /// `E|x|²/σ²`, linear.
    pub snr_x: f64,
    /// `Σ|α_k|²/σ²`, linear.
    pub snr_h: f64,
    pub cfar: CfarConfig,
}

impl ReceiverConfig {
    pub fn new(scheme: Scheme, estimator: Estimator, snr_x: f64, snr_h: f64) -> Self {
        Self {
            scheme,
            estimator,
            max_iterations: 2,
            feedback: Feedback::Hard,
            gain_fit: GainFit::Support,
            snr_source: SnrSource::Truth,
            snr_x,
            snr_h,
            cfar: CfarConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cfar.validate()?;
        if self.scheme == Scheme::DataAided && self.max_iterations == 0 {
            return Err(Error::config("data-aided receiver needs at least one iteration"));
        }
        if self.snr_x.is_nan() || self.snr_h.is_nan() || self.snr_x <= 0.0 || self.snr_h <= 0.0 {
            return Err(Error::config("SNRs must be positive"));
        }
        Ok(())
    }
}

/// Everything Stage 1 produces. Shared by the pilot-only benchmark and every
/// data-aided estimator of the same trial.
#[derive(Debug, Clone)]
pub struct Stage1 {
    pub estimate: ChannelEstimate,
    pub image: RealGrid,
    pub detections: DetectionList,
    /// Deduplicated detection bins the gains refer to.
    pub bins: Vec<(usize, usize)>,
    pub gains: Vec<Complex64>,
    pub reconstruction: ComplexGrid,
    /// Noise variance estimated from the pilot residual of the reconstruction.
    pub estimated_noise: f64,
}

impl Stage1 {
    pub fn run(rx: &RxFrame, tx: &TxFrame, transform: &DelayDopplerTransform, cfar: &CfarConfig, fit: GainFit) -> Result<Self> {
        let estimate = stage1_pilot_estimate(rx, tx)?;
        let image = transform.image(&estimate.h_hat);
        let detections = cfar_2d(&image, cfar)?;
        let bins = dedupe_bins(&detections.bins());
        let gains = ls_gains(&estimate, &bins, fit);
        let reconstruction = reconstruct_channel(&gains, &bins, estimate.h_hat.shape());
        let (ys, xs, r) = (rx.y.as_slice(), tx.x.as_slice(), reconstruction.as_slice());
        let pilots = tx.pilots.pilot_cells();
        let estimated_noise =
            pilots.iter().map(|&i| (ys[i] - xs[i] * r[i]).norm_sqr()).sum::<f64>() / pilots.len() as f64;
        Ok(Self {
            estimate,
            image,
            detections,
            bins,
            gains,
            reconstruction,
            estimated_noise,
        })
    }

    /// `(SNR_x, SNR_h)` from the Stage-1 fit.
    pub fn estimated_snrs(&self) -> (f64, f64) {
        let noise = self.estimated_noise.max(f64::MIN_POSITIVE);
        let power: f64 = self.gains.iter().map(|g| g.norm_sqr()).sum();
        (1.0 / noise, power / noise)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub h_hat_final: ChannelEstimate,
    /// Delay-Doppler image of the final estimate.
    pub image: RealGrid,
    pub detections: DetectionList,
    /// Demodulated data (soft LMMSE outputs) from the last iteration; zero
    /// on pilot cells, the true symbols for the genie.
    pub x_hat: ComplexGrid,
    /// Detections after each executed Stage 2/3 iteration.
    pub per_iteration: Vec<DetectionList>,
    /// True when Stage 1 found nothing and the data-aided chain fell back to
    /// the pilot-only output.
    pub fell_back: bool,
}

/// Reusable per-grid receiver state.
#[derive(Debug, Clone)]
pub struct Receiver {
    transform: DelayDopplerTransform,
}

impl Receiver {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            transform: DelayDopplerTransform::new(rows, cols),
        }
    }

    pub fn transform(&self) -> &DelayDopplerTransform {
        &self.transform
    }

    pub fn stage1(&self, rx: &RxFrame, tx: &TxFrame, cfg: &ReceiverConfig) -> Result<Stage1> {
        Stage1::run(rx, tx, &self.transform, &cfg.cfar, cfg.gain_fit)
    }

    /// Runs the configured scheme. `stage1` may be supplied to reuse work
    /// across schemes of the same trial; it is ignored by the genie.
    pub fn run(&self, rx: &RxFrame, tx: &TxFrame, cfg: &ReceiverConfig, stage1: Option<&Stage1>) -> Result<PipelineOutput> {
        cfg.validate()?;
        match cfg.scheme {
            Scheme::Genie => self.genie(rx, tx, cfg),
            Scheme::PilotOnly | Scheme::DataAided => {
                let owned;
                let s1 = match stage1 {
                    Some(s) => s,
                    None => {
                        owned = self.stage1(rx, tx, cfg)?;
                        &owned
                    }
                };
                if cfg.scheme == Scheme::PilotOnly {
                    Ok(pilot_only_output(s1, false))
                } else if s1.detections.is_empty() {
                    Ok(pilot_only_output(s1, true))
                } else {
                    self.data_aided(rx, tx, cfg, s1)
                }
            }
        }
    }

    fn detect(&self, estimate: &ChannelEstimate, cfar: &CfarConfig) -> Result<(RealGrid, DetectionList)> {
        let image = self.transform.image(&estimate.h_hat);
        let detections = cfar_2d(&image, cfar)?;
        Ok((image, detections))
    }

    fn genie(&self, rx: &RxFrame, tx: &TxFrame, cfg: &ReceiverConfig) -> Result<PipelineOutput> {
        let (n, m) = tx.x.shape();
        let mut pilot_part = ComplexGrid::zeros(n, m);
        let (ys, xs) = (rx.y.as_slice(), tx.x.as_slice());
        for &i in tx.pilots.pilot_cells() {
            pilot_part.as_mut_slice()[i] = ys[i] / xs[i];
        }
        let pilot_estimate = ChannelEstimate {
            h_hat: pilot_part,
            pilots: tx.pilots.clone(),
            support: Support::Pilots,
        };
        let mut x_hat = ComplexGrid::zeros(n, m);
        for &i in tx.pilots.data_cells() {
            x_hat.as_mut_slice()[i] = xs[i];
        }
        let estimate = refine_channel(&rx.y, &x_hat, &pilot_estimate, Estimator::Lmmse, cfg.snr_h)?;
        let (image, detections) = self.detect(&estimate, &cfg.cfar)?;
        Ok(PipelineOutput {
            h_hat_final: estimate,
            image,
            per_iteration: vec![detections.clone()],
            detections,
            x_hat,
            fell_back: false,
        })
    }

    fn data_aided(&self, rx: &RxFrame, tx: &TxFrame, cfg: &ReceiverConfig, s1: &Stage1) -> Result<PipelineOutput> {
        let (snr_x, snr_h) = match cfg.snr_source {
            SnrSource::Truth => (cfg.snr_x, cfg.snr_h),
            SnrSource::Estimated => s1.estimated_snrs(),
        };
        let constellation = &tx.constellation;
        let mut current = s1.reconstruction.clone();
        let mut per_iteration = Vec::with_capacity(cfg.max_iterations);
        let mut last = None;
        for _ in 0..cfg.max_iterations {
            let soft = lmmse_demod(&rx.y, &current, &tx.pilots, snr_x);
            let fed_back = match cfg.feedback {
                Feedback::Soft => soft.clone(),
                Feedback::Hard => {
                    let mut hard = soft.clone();
                    for &i in tx.pilots.data_cells() {
                        let v = &mut hard.as_mut_slice()[i];
                        *v = constellation.nearest_point(*v);
                    }
                    hard
                }
            };
            let estimate = refine_channel(&rx.y, &fed_back, &s1.estimate, cfg.estimator, snr_h)?;
            let (image, detections) = self.detect(&estimate, &cfg.cfar)?;
            per_iteration.push(detections.clone());
            current = estimate.h_hat.clone();
            last = Some((estimate, image, detections, soft));
        }
        let (estimate, image, detections, x_hat) = last.expect("at least one iteration");
        Ok(PipelineOutput {
            h_hat_final: estimate,
            image,
            detections,
            x_hat,
            per_iteration,
            fell_back: false,
        })
    }
}

fn pilot_only_output(s1: &Stage1, fell_back: bool) -> PipelineOutput {
    let (n, m) = s1.estimate.h_hat.shape();
    PipelineOutput {
        h_hat_final: s1.estimate.clone(),
        image: s1.image.clone(),
        detections: s1.detections.clone(),
        x_hat: ComplexGrid::zeros(n, m),
        per_iteration: Vec::new(),
        fell_back,
    }
}

/// One-shot convenience wrapper around [`Receiver`].
pub fn run_pipeline(rx: &RxFrame, tx: &TxFrame, cfg: &ReceiverConfig) -> Result<PipelineOutput> {
    let (n, m) = tx.x.shape();
    Receiver::new(n, m).run(rx, tx, cfg, None)
}

/// Delay-Doppler image of an estimate.
pub fn delay_doppler_image(h_hat: &ChannelEstimate) -> RealGrid {
    let (n, m) = h_hat.h_hat.shape();
    DelayDopplerTransform::new(n, m).image(&h_hat.h_hat)
}
