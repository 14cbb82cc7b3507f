//! Noiseless, on-grid self-checks with exact expected answers.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::{apply_channel, nearest_bin, snap_to_grid, synthesize_channel};
use crate::detect::CfarConfig;
use crate::ofdm::{build_tx_frame, Constellation, Modulation, Payload, PilotPattern, TxFrame};
use crate::receiver::{
    delay_doppler_image, ls_gains, reconstruct_channel, run_pipeline, stage1_pilot_estimate, Estimator,
    GainFit, ReceiverConfig, Scheme,
};
use crate::scenario::{derive_paths, PathSet, ScenarioConfig};
use crate::Result;

#[derive(Debug, Clone, Serialize)]
pub struct OracleCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> OracleCheck {
    OracleCheck { name, passed, detail }
}

fn max_relative_error(got: &[Complex64], want: &[Complex64]) -> f64 {
    got.iter()
        .zip(want)
        .map(|(g, w)| (g - w).norm() / w.norm())
        .fold(0.0, f64::max)
}

fn on_grid_reference() -> Result<(ScenarioConfig, PathSet)> {
    let cfg = ScenarioConfig::default();
    let paths = snap_to_grid(&derive_paths(&cfg)?, &cfg.waveform);
    Ok((cfg, paths))
}

fn frame(cfg: &ScenarioConfig, rho: f64, modulation: Modulation) -> Result<TxFrame> {
    let (n, m) = cfg.waveform.grid_shape();
    build_tx_frame(
        Arc::new(PilotPattern::generate(n, m, rho, 11)?),
        Arc::new(Constellation::new(modulation)),
        Payload::Seed(12),
    )
}

/// Genie receiver on the reference scenario with on-grid paths and no noise:
/// every path must be detected at its exact bin, and least squares on the
/// final estimate must return the true gains.
pub fn genie_noiseless() -> Result<OracleCheck> {
    let (cfg, paths) = on_grid_reference()?;
    let wf = &cfg.waveform;
    let tx = frame(&cfg, 5.0, Modulation::Qpsk)?;
    let rx = apply_channel(&tx, &synthesize_channel(&paths, wf), 0.0, 0)?;
    let rc = ReceiverConfig::new(Scheme::Genie, Estimator::Lmmse, f64::INFINITY, f64::INFINITY);
    let out = run_pipeline(&rx, &tx, &rc)?;
    let bins: Vec<_> = paths.paths.iter().map(|p| nearest_bin(p.delay_s, p.doppler_hz, wf)).collect();
    let missing: Vec<_> = bins.iter().filter(|&&b| !out.detections.contains_bin(b)).collect();
    let gains = ls_gains(&out.h_hat_final, &bins, GainFit::FullGrid);
    let truth: Vec<_> = paths.paths.iter().map(|p| p.gain).collect();
    let err = max_relative_error(&gains, &truth);
    Ok(check(
        "genie_noiseless_detection_and_gains",
        missing.is_empty() && err <= 1e-9,
        format!("true bins {bins:?}, missing {missing:?}, max relative gain error {err:.3e}"),
    ))
}

/// All-pilot noiseless Stage 1 followed by detection, LS and
/// reconstruction reproduces the on-grid channel.
pub fn reconstruction_round_trip() -> Result<OracleCheck> {
    let (cfg, paths) = on_grid_reference()?;
    let wf = &cfg.waveform;
    let h = synthesize_channel(&paths, wf);
    let tx = frame(&cfg, 100.0, Modulation::Qpsk)?;
    let rx = apply_channel(&tx, &h, 0.0, 0)?;
    let est = stage1_pilot_estimate(&rx, &tx)?;
    let dets = crate::detect::cfar_2d(&delay_doppler_image(&est), &CfarConfig::default())?;
    let bins = crate::receiver::dedupe_bins(&dets.bins());
    let gains = ls_gains(&est, &bins, GainFit::Support);
    let rec = reconstruct_channel(&gains, &bins, h.h.shape());
    let num: f64 = rec.iter().zip(h.h.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let rel = num / h.h.energy().sqrt();
    Ok(check("reconstruction_round_trip", rel <= 1e-9, format!("relative error {rel:.3e} with {} peaks", bins.len())))
}

/// With every cell a pilot the three schemes coincide.
pub fn full_pilot_schemes_agree() -> Result<OracleCheck> {
    let (cfg, paths) = on_grid_reference()?;
    let wf = &cfg.waveform;
    let tx = frame(&cfg, 100.0, Modulation::Qpsk)?;
    let sigma2 = crate::scenario::noise_variance(wf);
    let rx = apply_channel(&tx, &synthesize_channel(&paths, wf), sigma2, 3)?;
    let (sx, sh) = (1.0 / sigma2, paths.total_power() / sigma2);
    let outs: Vec<_> = [Scheme::PilotOnly, Scheme::DataAided, Scheme::Genie]
        .into_iter()
        .map(|s| run_pipeline(&rx, &tx, &ReceiverConfig::new(s, Estimator::Lmmse, sx, sh)))
        .collect::<Result<_>>()?;
    let same = outs.windows(2).all(|w| w[0].detections == w[1].detections && w[0].h_hat_final.h_hat == w[1].h_hat_final.h_hat);
    Ok(check("full_pilot_schemes_agree", same, format!("{} detections", outs[0].detections.len())))
}

/// QPSK: reciprocal and matched filtering give identical refinements.
pub fn qpsk_rf_equals_mf() -> Result<OracleCheck> {
    let (cfg, paths) = on_grid_reference()?;
    let wf = &cfg.waveform;
    let tx = frame(&cfg, 5.0, Modulation::Qpsk)?;
    let sigma2 = crate::scenario::noise_variance(wf);
    let rx = apply_channel(&tx, &synthesize_channel(&paths, wf), sigma2, 4)?;
    let (sx, sh) = (1.0 / sigma2, paths.total_power() / sigma2);
    let rf = run_pipeline(&rx, &tx, &ReceiverConfig::new(Scheme::DataAided, Estimator::Rf, sx, sh))?;
    let mf = run_pipeline(&rx, &tx, &ReceiverConfig::new(Scheme::DataAided, Estimator::Mf, sx, sh))?;
    let same = rf.h_hat_final.h_hat == mf.h_hat_final.h_hat && rf.detections == mf.detections;
    Ok(check("qpsk_rf_equals_mf", same, format!("{} detections", rf.detections.len())))
}

/// Runs every oracle check.
pub fn run_oracle_suite() -> Result<Vec<OracleCheck>> {
    Ok(vec![
        genie_noiseless()?,
        reconstruction_round_trip()?,
        full_pilot_schemes_agree()?,
        qpsk_rf_equals_mf()?,
    ])
}

#[cfg(test)]
mod tests {
    #[test]
    fn suite_passes() {
        for c in super::run_oracle_suite().unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
