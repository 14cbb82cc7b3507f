//! Two-dimensional cell-averaging CFAR on delay-Doppler images, peak
//! extraction and ground-truth association.
//!
//! For each cell the noise level is the mean of a rectangular training
//! ring (training window minus guard window, both centred on the cell) and
//! the threshold is `α · mean` with `α = N_t (P_fa^{-1/N_t} - 1)`, which
//! gives the requested false-alarm rate for exponentially distributed cells.
//! A detection is a threshold exceedance that is also a local maximum of the
//! image in its 8-neighbourhood.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::{nearest_bin, signed_doppler_bin};
use crate::scenario::{PathSet, WaveformConfig, SPEED_OF_LIGHT};
use crate::{Error, RealGrid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CfarConfig {
    pub pfa: f64,
    /// Guard half-widths (delay, Doppler).
    pub guard: (usize, usize),
    /// Training half-widths (delay, Doppler), measured from the cell under test.
    pub training: (usize, usize),
    /// Treat the image as a torus.
    pub wrap: bool,
    /// Cells more than this many dB below the image maximum are never
    /// detected. Keeps round-off in noiseless images from producing peaks.
    pub floor_db: f64,
}

impl Default for CfarConfig {
    fn default() -> Self {
        Self {
            pfa: 1e-4,
            guard: (2, 2),
            training: (2, 10),
            wrap: true,
            floor_db: -120.0,
        }
    }
}

impl CfarConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pfa > 0.0 && self.pfa < 1.0) {
            return Err(Error::config(format!("CFAR P_fa {} outside (0, 1)", self.pfa)));
        }
        if self.training.0 < self.guard.0 || self.training.1 < self.guard.1 {
            return Err(Error::config("CFAR training window smaller than guard window"));
        }
        if self.floor_db.is_nan() || self.floor_db > 0.0 {
            return Err(Error::config("CFAR floor must be a non-positive dB value"));
        }
        if self.ring_cells() == 0 {
            return Err(Error::config("CFAR training ring is empty"));
        }
        Ok(())
    }

    /// Cells in the full training ring.
    pub fn ring_cells(&self) -> usize {
        let (td, tq) = self.training;
        let (gd, gq) = self.guard;
        (2 * td + 1) * (2 * tq + 1) - (2 * gd + 1) * (2 * gq + 1)
    }

    fn check_fit(&self, rows: usize, cols: usize) -> Result<()> {
        let (td, tq) = self.training;
        if 2 * td + 1 > rows || 2 * tq + 1 > cols {
            return Err(Error::CfarWindow {
                window: (2 * td + 1, 2 * tq + 1),
                rows,
                cols,
            });
        }
        Ok(())
    }
}

/// `α = N_t (P_fa^{-1/N_t} - 1)`.
pub fn threshold_factor(n_t: usize, pfa: f64) -> f64 {
    let n = n_t as f64;
    n * (pfa.powf(-1.0 / n) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub delay_bin: usize,
    pub doppler_bin: usize,
    pub value: f64,
    pub threshold: f64,
}

/// Peaks sorted by decreasing image value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionList {
    pub peaks: Vec<Peak>,
}

impl DetectionList {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    /// `(delay_bin, doppler_bin)` of every peak.
    pub fn bins(&self) -> Vec<(usize, usize)> {
        self.peaks.iter().map(|p| (p.delay_bin, p.doppler_bin)).collect()
    }

    pub fn contains_bin(&self, bin: (usize, usize)) -> bool {
        self.peaks.iter().any(|p| (p.delay_bin, p.doppler_bin) == bin)
    }

    /// Writes the peaks as CSV. Differential range is `c·τ̂ - d₀` with
    /// `d₀ = c · los_delay_s`.
    pub fn write_csv<W: Write>(&self, mut w: W, wf: &WaveformConfig, los_delay_s: f64) -> std::io::Result<()> {
        writeln!(w, "delay_bin,doppler_bin,differential_range_m,doppler_hz,value,threshold")?;
        for p in &self.peaks {
            let range = SPEED_OF_LIGHT * (p.delay_bin as f64 * wf.delay_resolution() - los_delay_s);
            let doppler = signed_doppler_bin(p.doppler_bin, wf.symbols) as f64 * wf.doppler_resolution();
            writeln!(
                w,
                "{},{},{},{},{},{}",
                p.delay_bin,
                p.doppler_bin,
                crate::harness::fmt_float(range),
                crate::harness::fmt_float(doppler),
                crate::harness::fmt_float(p.value),
                crate::harness::fmt_float(p.threshold)
            )?;
        }
        Ok(())
    }
}

/// 2-D inclusive prefix sums over a (possibly wrap-padded) image.
struct BoxSums {
    sums: Vec<f64>,
    width: usize,
    pad: (usize, usize),
}

impl BoxSums {
    fn new(image: &RealGrid, pad: (usize, usize), wrap: bool) -> Self {
        let (rows, cols) = image.shape();
        let (er, ec) = (rows + 2 * pad.0, cols + 2 * pad.1);
        let width = ec + 1;
        let mut sums = vec![0.0; (er + 1) * width];
        for i in 0..er {
            let mut row_acc = 0.0;
            for j in 0..ec {
                let v = if wrap {
                    let n = (i + rows - pad.0 % rows) % rows;
                    let m = (j + cols - pad.1 % cols) % cols;
                    image[(n, m)]
                } else if i >= pad.0 && i < pad.0 + rows && j >= pad.1 && j < pad.1 + cols {
                    image[(i - pad.0, j - pad.1)]
                } else {
                    0.0
                };
                row_acc += v;
                sums[(i + 1) * width + j + 1] = sums[i * width + j + 1] + row_acc;
            }
        }
        Self { sums, width, pad }
    }

    /// Sum over the window of half-widths `half` centred on image cell `(n, m)`.
    fn window(&self, n: usize, m: usize, half: (usize, usize)) -> f64 {
        let r0 = n + self.pad.0 - half.0;
        let r1 = n + self.pad.0 + half.0 + 1;
        let c0 = m + self.pad.1 - half.1;
        let c1 = m + self.pad.1 + half.1 + 1;
        let s = |r: usize, c: usize| self.sums[r * self.width + c];
        s(r1, c1) - s(r0, c1) - s(r1, c0) + s(r0, c0)
    }
}

/// Number of cells of a centred window that fall inside `[0, len)`.
fn clipped(center: usize, half: usize, len: usize) -> usize {
    let lo = center.saturating_sub(half);
    let hi = (center + half).min(len - 1);
    hi - lo + 1
}

/// Per-cell CFAR thresholds, never below the relative floor. Cells whose
/// ring is empty (only possible without wrap) get an infinite threshold.
pub fn cfar_thresholds(image: &RealGrid, cfg: &CfarConfig) -> Result<RealGrid> {
    cfg.validate()?;
    let (rows, cols) = image.shape();
    cfg.check_fit(rows, cols)?;
    let sums = BoxSums::new(image, cfg.training, cfg.wrap);
    let alpha_full = threshold_factor(cfg.ring_cells(), cfg.pfa);
    let peak = image.iter().copied().fold(0.0, f64::max);
    let floor = peak * 10f64.powf(cfg.floor_db / 10.0);
    Ok(RealGrid::from_fn(rows, cols, |n, m| {
        let ring = sums.window(n, m, cfg.training) - sums.window(n, m, cfg.guard);
        let (n_t, alpha) = if cfg.wrap {
            (cfg.ring_cells(), alpha_full)
        } else {
            let outer = clipped(n, cfg.training.0, rows) * clipped(m, cfg.training.1, cols);
            let inner = clipped(n, cfg.guard.0, rows) * clipped(m, cfg.guard.1, cols);
            let n_t = outer - inner;
            (n_t, threshold_factor(n_t, cfg.pfa))
        };
        if n_t == 0 {
            f64::INFINITY
        } else {
            // Clamp tiny negative round-off from the prefix-sum differences.
            (alpha * ring.max(0.0) / n_t as f64).max(floor)
        }
    }))
}

/// Number of cells whose value exceeds its CFAR threshold.
pub fn count_exceedances(image: &RealGrid, cfg: &CfarConfig) -> Result<usize> {
    let thresholds = cfar_thresholds(image, cfg)?;
    Ok(image.iter().zip(thresholds.iter()).filter(|(v, t)| v > t).count())
}

fn is_local_max(image: &RealGrid, n: usize, m: usize, wrap: bool) -> bool {
    let (rows, cols) = image.shape();
    let v = image[(n, m)];
    let here = image.linear_index(n, m);
    for dn in -1i64..=1 {
        for dm in -1i64..=1 {
            if dn == 0 && dm == 0 {
                continue;
            }
            let (nn, mm) = (n as i64 + dn, m as i64 + dm);
            let (nn, mm) = if wrap {
                (nn.rem_euclid(rows as i64) as usize, mm.rem_euclid(cols as i64) as usize)
            } else if nn < 0 || mm < 0 || nn >= rows as i64 || mm >= cols as i64 {
                continue;
            } else {
                (nn as usize, mm as usize)
            };
            let u = image[(nn, mm)];
            // Plateaus resolve to the cell with the smallest linear index.
            if u > v || (u == v && image.linear_index(nn, mm) < here) {
                return false;
            }
        }
    }
    true
}

/// Runs CA-CFAR on `image` and returns the detected peaks.
pub fn cfar_2d(image: &RealGrid, cfg: &CfarConfig) -> Result<DetectionList> {
    let thresholds = cfar_thresholds(image, cfg)?;
    let (rows, cols) = image.shape();
    let mut peaks = Vec::new();
    for m in 0..cols {
        for n in 0..rows {
            let (v, t) = (image[(n, m)], thresholds[(n, m)]);
            if v > t && is_local_max(image, n, m, cfg.wrap) {
                peaks.push(Peak {
                    delay_bin: n,
                    doppler_bin: m,
                    value: v,
                    threshold: t,
                });
            }
        }
    }
    peaks.sort_by(|a, b| b.value.total_cmp(&a.value));
    Ok(DetectionList { peaks })
}

fn torus_distance(a: usize, b: usize, len: usize) -> usize {
    let d = a.abs_diff(b) % len;
    d.min(len - d)
}

/// Marks each true path as detected if a peak lies within `gate` bins of
/// its nearest grid bin in both delay and Doppler (toroidal distance).
///
/// Every peak matches at most one path. Candidate pairs are taken greedily
/// by decreasing peak value, then decreasing path gain magnitude.
pub fn associate(detections: &DetectionList, truth: &PathSet, wf: &WaveformConfig, gate: usize) -> Vec<bool> {
    let (rows, cols) = wf.grid_shape();
    let bins: Vec<_> = truth
        .paths
        .iter()
        .map(|p| nearest_bin(p.delay_s, p.doppler_hz, wf))
        .collect();
    let mut pairs = Vec::new();
    for (i, peak) in detections.peaks.iter().enumerate() {
        for (k, &(p, q)) in bins.iter().enumerate() {
            if torus_distance(peak.delay_bin, p, rows) <= gate && torus_distance(peak.doppler_bin, q, cols) <= gate {
                pairs.push((i, k));
            }
        }
    }
    pairs.sort_by(|&(i, k), &(j, l)| {
        let by_value = detections.peaks[j].value.total_cmp(&detections.peaks[i].value);
        let by_gain = truth.paths[l].gain.norm().total_cmp(&truth.paths[k].gain.norm());
        by_value.then(by_gain).then(i.cmp(&j)).then(k.cmp(&l))
    });
    let mut peak_used = vec![false; detections.len()];
    let mut hit = vec![false; truth.len()];
    for (i, k) in pairs {
        if !peak_used[i] && !hit[k] {
            peak_used[i] = true;
            hit[k] = true;
        }
    }
    hit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Path;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn wf(rows: usize, cols: usize) -> WaveformConfig {
        WaveformConfig {
            subcarriers: rows,
            symbols: cols,
            ..WaveformConfig::default()
        }
    }

    fn on_bin(wf: &WaveformConfig, p: usize, q: usize, gain: f64) -> Path {
        Path {
            gain: Complex64::new(gain, 0.0),
            delay_s: p as f64 * wf.delay_resolution(),
            doppler_hz: q as f64 * wf.doppler_resolution(),
            aod_rad: 0.0,
        }
    }

    #[test]
    fn alpha_value() {
        let a = threshold_factor(60, 1e-4);
        assert!((a - 9.95486).abs() < 1e-5, "{a}");
        // Inverse check: (1 + α/N)^(-N) recovers P_fa.
        assert!(((1.0 + a / 60.0).powi(-60) / 1e-4 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_ring() {
        let c = CfarConfig::default();
        assert_eq!(c.ring_cells(), 5 * 21 - 25);
        c.validate().unwrap();
    }

    #[test]
    fn zero_image() {
        let img = RealGrid::zeros(40, 30);
        assert!(cfar_2d(&img, &CfarConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn floor_suppresses_round_off() {
        let mut img = RealGrid::from_fn(20, 30, |n, m| 1e-30 * (1 + (n * 7 + m * 13) % 17) as f64);
        img[(5, 5)] = 1.0;
        let d = cfar_2d(&img, &CfarConfig::default()).unwrap();
        assert_eq!(d.bins(), vec![(5, 5)]);
        let no_floor = CfarConfig {
            floor_db: f64::NEG_INFINITY,
            ..CfarConfig::default()
        };
        assert!(cfar_2d(&img, &no_floor).unwrap().len() > 1);
    }

    #[test]
    fn window_too_large() {
        let img = RealGrid::zeros(40, 10);
        assert!(matches!(cfar_2d(&img, &CfarConfig::default()), Err(Error::CfarWindow { .. })));
    }

    #[test]
    fn ring_mean_matches_direct_sum() {
        let img = RealGrid::from_fn(13, 25, |n, m| ((n * 7 + m * 3) % 11) as f64 + 0.5);
        let cfg = CfarConfig::default();
        let t = cfar_thresholds(&img, &cfg).unwrap();
        let alpha = threshold_factor(cfg.ring_cells(), cfg.pfa);
        for (n, m) in [(0, 0), (12, 24), (6, 3), (1, 20)] {
            let mut sum = 0.0;
            for dn in -2i64..=2 {
                for dm in -10i64..=10 {
                    if dn.abs() <= 2 && dm.abs() <= 2 {
                        continue;
                    }
                    sum += img[((n as i64 + dn).rem_euclid(13) as usize, (m as i64 + dm).rem_euclid(25) as usize)];
                }
            }
            let expected = alpha * sum / 80.0;
            assert!((t[(n, m)] - expected).abs() < 1e-10 * expected, "({n},{m})");
        }
    }

    #[test]
    fn no_wrap_clips_ring() {
        let img = RealGrid::from_fn(10, 30, |_, _| 1.0);
        let cfg = CfarConfig {
            wrap: false,
            ..CfarConfig::default()
        };
        let t = cfar_thresholds(&img, &cfg).unwrap();
        // Corner cell: 3 × 11 window, 3 × 3 guard.
        assert!((t[(0, 0)] - threshold_factor(24, 1e-4)).abs() < 1e-12);
        assert!((t[(5, 15)] - threshold_factor(80, 1e-4)).abs() < 1e-12);
    }

    #[test]
    fn isolated_spike_detected_once() {
        let mut img = RealGrid::from_fn(32, 32, |n, m| 1.0 + 0.01 * ((n + 3 * m) % 5) as f64);
        img[(7, 30)] = 1e3;
        img[(8, 30)] = 5e2;
        let d = cfar_2d(&img, &CfarConfig::default()).unwrap();
        assert_eq!(d.bins(), vec![(7, 30)]);
        assert!(d.peaks[0].value > d.peaks[0].threshold);
    }

    #[test]
    fn plateau_yields_single_peak() {
        let mut img = RealGrid::from_fn(20, 30, |_, _| 1.0);
        img[(4, 4)] = 100.0;
        img[(4, 5)] = 100.0;
        let d = cfar_2d(&img, &CfarConfig::default()).unwrap();
        assert_eq!(d.bins(), vec![(4, 4)]);
    }

    #[test]
    fn association_rules() {
        let w = wf(64, 32);
        let truth = PathSet {
            paths: vec![on_bin(&w, 10, 0, 1.0), on_bin(&w, 12, 0, 0.1)],
        };
        let peak = |p, q, value| Peak {
            delay_bin: p,
            doppler_bin: q,
            value,
            threshold: 0.0,
        };
        let exact = DetectionList {
            peaks: vec![peak(10, 0, 5.0)],
        };
        assert_eq!(associate(&exact, &truth, &w, 1), vec![true, false]);

        let far = DetectionList {
            peaks: vec![peak(15, 0, 5.0)],
        };
        assert_eq!(associate(&far, &truth, &w, 1), vec![false, false]);

        // One peak between both targets goes to the stronger path only.
        let between = DetectionList {
            peaks: vec![peak(11, 31, 5.0)],
        };
        assert_eq!(associate(&between, &truth, &w, 1), vec![true, false]);

        let both = DetectionList {
            peaks: vec![peak(11, 0, 5.0), peak(12, 1, 1.0)],
        };
        assert_eq!(associate(&both, &truth, &w, 1), vec![true, true]);
    }

    #[test]
    fn peaks_csv() {
        let w = WaveformConfig::default();
        let d = DetectionList {
            peaks: vec![Peak {
                delay_bin: 8,
                doppler_bin: 59,
                value: 2.0,
                threshold: 1.0,
            }],
        };
        let mut out = Vec::new();
        d.write_csv(&mut out, &w, 8.0 * w.delay_resolution()).unwrap();
        let text = String::from_utf8(out).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[0..2], ["8", "59"]);
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.0);
        assert!(row[3].parse::<f64>().unwrap() < 0.0);
    }

    fn image_strategy() -> impl Strategy<Value = RealGrid> {
        prop::collection::vec(0.0f64..1.0, 24 * 24).prop_map(|v| {
            // Exponential-like cells with a few strong spikes.
            let data = v
                .iter()
                .enumerate()
                .map(|(i, &u)| {
                    let e = -(1.0 - u).ln();
                    if i % 97 == 5 {
                        e * 200.0
                    } else {
                        e
                    }
                })
                .collect();
            RealGrid::from_column_major(24, 24, data)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn scale_invariant(img in image_strategy(), c in 1e-6f64..1e6) {
            let cfg = CfarConfig::default();
            let a = cfar_2d(&img, &cfg).unwrap();
            let b = cfar_2d(&img.map(|v| v * c), &cfg).unwrap();
            prop_assert_eq!(a.bins(), b.bins());
        }

        #[test]
        fn larger_pfa_never_removes(img in image_strategy(), lo in 1e-6f64..1e-2, factor in 1.0f64..50.0) {
            let base = CfarConfig { pfa: lo, ..CfarConfig::default() };
            let looser = CfarConfig { pfa: (lo * factor).min(0.5), ..base };
            let a = cfar_2d(&img, &base).unwrap();
            let b = cfar_2d(&img, &looser).unwrap();
            for bin in a.bins() {
                prop_assert!(b.contains_bin(bin));
            }
        }
    }
}
