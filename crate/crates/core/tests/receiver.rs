use std::sync::Arc;

use isac_core::channel::{apply_channel, synthesize_channel, RxFrame};
use isac_core::ofdm::{build_tx_frame, Constellation, Modulation, Payload, PilotPattern, TxFrame};
use isac_core::receiver::{
    lmmse_demod, ls_gains, reconstruct_channel, refine_channel, run_pipeline, stage1_pilot_estimate, ChannelEstimate, Estimator,
    GainFit, ReceiverConfig, Scheme, Support,
};
use isac_core::scenario::{derive_paths, noise_variance, PathSet, ScenarioConfig};
use isac_core::{Complex64, ComplexGrid, Error};
use proptest::prelude::*;

const J: Complex64 = Complex64::new(0.0, 1.0);

fn frame(rows: usize, cols: usize, rho: f64, modulation: Modulation, seed: u64) -> TxFrame {
    build_tx_frame(
        Arc::new(PilotPattern::generate(rows, cols, rho, seed).unwrap()),
        Arc::new(Constellation::new(modulation)),
        Payload::Seed(seed + 1),
    )
    .unwrap()
}

fn rx_of(y: ComplexGrid) -> RxFrame {
    RxFrame { y, truth: PathSet::default() }
}

#[test]
fn stage1_divides_by_pilots_and_zero_fills() {
    let pilots = Arc::new(PilotPattern::from_cells(4, 3, &[(0, 0), (2, 1), (3, 2)]).unwrap());
    let mut tx = build_tx_frame(pilots.clone(), Arc::new(Constellation::new(Modulation::Qpsk)), Payload::Seed(0)).unwrap();
    for &i in pilots.pilot_cells() {
        tx.x.as_mut_slice()[i] = J;
    }
    let y = ComplexGrid::from_fn(4, 3, |_, _| 2.0 * J);
    let est = stage1_pilot_estimate(&rx_of(y), &tx).unwrap();
    assert_eq!(est.support, Support::Pilots);
    for i in 0..12 {
        let want = if pilots.is_pilot(i) { Complex64::new(2.0, 0.0) } else { Complex64::default() };
        assert_eq!(est.h_hat.as_slice()[i], want);
    }
}

#[test]
fn stage1_needs_pilots() {
    let tx = frame(8, 4, 0.0, Modulation::Qpsk, 1);
    let y = ComplexGrid::zeros(8, 4);
    assert!(matches!(stage1_pilot_estimate(&rx_of(y), &tx), Err(Error::EmptyPilotSet)));
}

fn full_estimate(h: ComplexGrid, rho: f64) -> ChannelEstimate {
    let (n, m) = h.shape();
    ChannelEstimate {
        h_hat: h,
        pilots: Arc::new(PilotPattern::generate(n, m, rho, 3).unwrap()),
        support: Support::Full,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn least_squares_recovers_on_grid_gains(
        bins in prop::collection::btree_set((0usize..32, 0usize..8), 1..5),
        raw in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 5),
    ) {
        let bins: Vec<_> = bins.into_iter().collect();
        let gains: Vec<Complex64> = raw.iter().take(bins.len()).map(|&(a, b)| Complex64::new(a, b)).collect();
        prop_assume!(gains.iter().all(|g| g.norm() > 1e-3));
        let h = reconstruct_channel(&gains, &bins, (32, 8));
        for fit in [GainFit::Support, GainFit::FullGrid] {
            let got = ls_gains(&full_estimate(h.clone(), 10.0), &bins, fit);
            for (g, w) in got.iter().zip(&gains) {
                prop_assert!((g - w).norm() <= 1e-10 * w.norm().max(1.0));
            }
        }
    }

    #[test]
    fn refinement_keeps_pilot_cells(seed in 0u64..1000, est_idx in 0usize..3, snr in 0.1f64..1e4) {
        let tx = frame(16, 6, 20.0, Modulation::Qam16, seed);
        let y = ComplexGrid::from_fn(16, 6, |n, m| Complex64::new(n as f64 - 3.0, m as f64 + 0.5));
        let s1 = stage1_pilot_estimate(&rx_of(y.clone()), &tx).unwrap();
        let estimator = [Estimator::Rf, Estimator::Mf, Estimator::Lmmse][est_idx];
        let refined = refine_channel(&y, &tx.x, &s1, estimator, snr).unwrap();
        for &i in tx.pilots.pilot_cells() {
            prop_assert_eq!(refined.h_hat.as_slice()[i], s1.h_hat.as_slice()[i]);
        }
        prop_assert_eq!(refined.support, Support::Full);
    }
}

#[test]
fn pilot_support_fit_is_unbiased_and_full_grid_fit_is_scaled() {
    let bins = vec![(5, 0), (9, 2)];
    let gains = vec![Complex64::new(1.0, 0.5), Complex64::new(-0.3, 0.2)];
    let h = reconstruct_channel(&gains, &bins, (64, 8));
    let tx = frame(64, 8, 25.0, Modulation::Qpsk, 9);
    let rx = RxFrame {
        y: ComplexGrid::from_fn(64, 8, |n, m| tx.x.as_slice()[n + 64 * m] * h.as_slice()[n + 64 * m]),
        truth: PathSet::default(),
    };
    let s1 = stage1_pilot_estimate(&rx, &tx).unwrap();
    let support = ls_gains(&s1, &bins, GainFit::Support);
    let full = ls_gains(&s1, &bins, GainFit::FullGrid);
    for (g, w) in support.iter().zip(&gains) {
        assert!((g - w).norm() < 1e-10);
    }
    assert!(full[0].norm() < 0.6 * gains[0].norm());
}

#[test]
fn lmmse_refinement_is_a_wiener_filter() {
    let tx = frame(8, 4, 25.0, Modulation::Qpsk, 2);
    let h = Complex64::new(0.7, -0.4);
    let y = ComplexGrid::from_fn(8, 4, |n, m| tx.x.as_slice()[n + 8 * m] * h);
    let s1 = stage1_pilot_estimate(&rx_of(y.clone()), &tx).unwrap();
    let snr = 4.0;
    let est = refine_channel(&y, &tx.x, &s1, Estimator::Lmmse, snr).unwrap();
    let factor = snr / (snr + 1.0);
    for &i in tx.pilots.data_cells() {
        assert!((est.h_hat.as_slice()[i] - h * factor).norm() < 1e-12);
    }
}

#[test]
fn lmmse_tends_to_reciprocal_filtering_at_high_snr() {
    let tx = frame(16, 8, 10.0, Modulation::Qam64, 4);
    let y = ComplexGrid::from_fn(16, 8, |n, m| Complex64::new((n * m) as f64 * 0.01 - 0.3, 0.2 - n as f64 * 0.02));
    let s1 = stage1_pilot_estimate(&rx_of(y.clone()), &tx).unwrap();
    let rf = refine_channel(&y, &tx.x, &s1, Estimator::Rf, 1.0).unwrap();
    let lmmse = refine_channel(&y, &tx.x, &s1, Estimator::Lmmse, 1e12).unwrap();
    for (a, b) in rf.h_hat.iter().zip(lmmse.h_hat.iter()) {
        assert!((a - b).norm() <= 1e-9 * (1.0 + a.norm()));
    }
}

#[test]
fn reciprocal_filtering_rejects_vanishing_symbols() {
    let tx = frame(8, 4, 25.0, Modulation::Qpsk, 5);
    let y = ComplexGrid::from_fn(8, 4, |_, _| Complex64::new(1.0, 0.0));
    let s1 = stage1_pilot_estimate(&rx_of(y.clone()), &tx).unwrap();
    let zeros = ComplexGrid::zeros(8, 4);
    assert!(matches!(
        refine_channel(&y, &zeros, &s1, Estimator::Rf, 1.0),
        Err(Error::VanishingSymbol { .. })
    ));
    assert!(refine_channel(&y, &zeros, &s1, Estimator::Mf, 1.0).is_ok());
}

#[test]
fn demodulation_inverts_a_known_channel() {
    let tx = frame(16, 4, 10.0, Modulation::Qam16, 6);
    let h = ComplexGrid::from_fn(16, 4, |n, m| Complex64::from_polar(1.0 + n as f64 * 0.1, m as f64));
    let y = ComplexGrid::from_fn(16, 4, |n, m| tx.x.as_slice()[n + 16 * m] * h.as_slice()[n + 16 * m]);
    let x = lmmse_demod(&y, &h, &tx.pilots, f64::INFINITY);
    for i in 0..64 {
        if tx.pilots.is_pilot(i) {
            assert_eq!(x.as_slice()[i], Complex64::default());
        } else {
            assert!((x.as_slice()[i] - tx.x.as_slice()[i]).norm() < 1e-12);
        }
    }
}

#[test]
fn full_pilot_grid_makes_schemes_identical() {
    let cfg = ScenarioConfig::default();
    let wf = &cfg.waveform;
    let (n, m) = wf.grid_shape();
    let paths = derive_paths(&cfg).unwrap();
    let sigma2 = noise_variance(wf);
    let tx = frame(n, m, 100.0, Modulation::Qpsk, 7);
    let rx = apply_channel(&tx, &synthesize_channel(&paths, wf), sigma2, 8).unwrap();
    let cfg_of = |scheme| ReceiverConfig::new(scheme, Estimator::Lmmse, 1.0 / sigma2, paths.total_power() / sigma2);
    let outs: Vec<_> = [Scheme::PilotOnly, Scheme::DataAided, Scheme::Genie]
        .into_iter()
        .map(|s| run_pipeline(&rx, &tx, &cfg_of(s)).unwrap())
        .collect();
    assert!(!outs[0].detections.is_empty());
    for o in &outs[1..] {
        assert_eq!(o.h_hat_final.h_hat, outs[0].h_hat_final.h_hat);
        assert_eq!(o.detections, outs[0].detections);
    }
}

#[test]
fn data_aided_reports_each_iteration() {
    let cfg = ScenarioConfig::default();
    let wf = &cfg.waveform;
    let (n, m) = wf.grid_shape();
    let paths = derive_paths(&cfg).unwrap();
    let sigma2 = noise_variance(wf);
    let tx = frame(n, m, 5.0, Modulation::Qpsk, 9);
    let rx = apply_channel(&tx, &synthesize_channel(&paths, wf), sigma2, 10).unwrap();
    let mut rc = ReceiverConfig::new(Scheme::DataAided, Estimator::Lmmse, 1.0 / sigma2, paths.total_power() / sigma2);
    rc.max_iterations = 3;
    let out = run_pipeline(&rx, &tx, &rc).unwrap();
    assert!(!out.fell_back);
    assert_eq!(out.per_iteration.len(), 3);
    assert_eq!(out.per_iteration.last(), Some(&out.detections));
    rc.max_iterations = 0;
    assert!(run_pipeline(&rx, &tx, &rc).is_err());
}
