//! Detection probability, constellation-constrained mutual information,
//! achievable rate and range profiles.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::ofdm::Constellation;
use crate::scenario::{WaveformConfig, SPEED_OF_LIGHT};
use crate::seed::{self, Stream};
use crate::{ComplexGrid, Error, RealGrid, Result};

/// Fraction of trials with a hit.
pub fn empirical_pd(hits: &[bool]) -> Result<f64> {
    if hits.is_empty() {
        return Err(Error::config("empirical Pd needs at least one trial"));
    }
    Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64)
}

/// Binomial standard error of an empirical probability over `n` trials.
pub fn pd_stderr(pd: f64, n: usize) -> f64 {
    (pd * (1.0 - pd) / n as f64).sqrt()
}

const MI_SHARD: usize = 4096;

/// Monte Carlo estimate of `I(X; Y | H)` in bits per channel use for a
/// uniform input over `constellation`, averaged over the cells of `h`:
///
/// `I = log₂Q − E[log₂ Σ_x' exp((−|h(x − x') + z|² + |z|²)/σ²)]`.
///
/// Samples are drawn in fixed-size shards with their own seeds, so the
/// result does not depend on the number of worker threads. The estimate is
/// clamped to `[0, log₂Q]`.
pub fn mutual_information(constellation: &Constellation, h: &ComplexGrid, sigma2: f64, n_mc: usize, seed: u64) -> Result<f64> {
    if n_mc == 0 {
        return Err(Error::config("mutual information needs at least one sample"));
    }
    if h.is_empty() {
        return Err(Error::config("mutual information needs a non-empty channel"));
    }
    let log2q = (constellation.order() as f64).log2();
    if sigma2.is_infinite() {
        return Ok(0.0);
    }
    if sigma2 <= 0.0 || sigma2.is_nan() {
        return Ok(log2q);
    }
    let points = constellation.points();
    let cells = h.as_slice();
    let shards = n_mc.div_ceil(MI_SHARD);
    let std = (sigma2 / 2.0).sqrt();
    let sums: Vec<f64> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let count = MI_SHARD.min(n_mc - shard * MI_SHARD);
            let mut rng = seed::rng(seed::derive(seed, Stream::MutualInformation, shard as u64));
            let mut exponents = vec![0.0; points.len()];
            let mut acc = 0.0;
            for _ in 0..count {
                let hv = cells[rng.random_range(0..cells.len())];
                let x = points[rng.random_range(0..points.len())];
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                let z = Complex64::new(re * std, im * std);
                let z2 = z.norm_sqr();
                let mut max = f64::NEG_INFINITY;
                for (e, &xp) in exponents.iter_mut().zip(points) {
                    *e = (z2 - (hv * (x - xp) + z).norm_sqr()) / sigma2;
                    max = max.max(*e);
                }
                let lse = max + exponents.iter().map(|e| (e - max).exp()).sum::<f64>().ln();
                acc += lse / std::f64::consts::LN_2;
            }
            acc
        })
        .collect();
    let mean = sums.iter().sum::<f64>() / n_mc as f64;
    Ok((log2q - mean).clamp(0.0, log2q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateResult {
    /// Bits per channel use.
    pub mi_per_symbol: f64,
    /// Bits per resource element after discounting pilot overhead.
    pub rate: f64,
    pub rho: f64,
}

/// `rate = mi · (100 − ρ)/100`.
pub fn achievable_rate(mi: f64, rho: f64) -> Result<RateResult> {
    if !(0.0..=100.0).contains(&rho) {
        return Err(Error::config(format!("pilot percentage {rho} outside [0, 100]")));
    }
    Ok(RateResult {
        mi_per_symbol: mi,
        rate: mi * (100.0 - rho) / 100.0,
        rho,
    })
}

/// Profile values at or below this level are reported as this level.
pub const PROFILE_FLOOR_DB: f64 = -300.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub delay_bin: usize,
    /// Bistatic path length minus the LOS path length.
    pub differential_range_m: f64,
    /// Normalized to a 0 dB peak.
    pub value_db: f64,
}

/// Per-delay-bin maximum over Doppler, normalized to a unit peak.
pub fn range_profile_linear(image: &RealGrid) -> Vec<f64> {
    let mut profile = vec![0.0f64; image.rows()];
    for m in 0..image.cols() {
        for (p, &v) in profile.iter_mut().zip(image.column(m)) {
            *p = p.max(v);
        }
    }
    let peak = profile.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        profile.iter_mut().for_each(|v| *v /= peak);
    }
    profile
}

/// Range profile in dB against differential range, with the LOS delay bin
/// at zero.
pub fn range_profile(image: &RealGrid, wf: &WaveformConfig, los_bin: usize) -> Vec<ProfilePoint> {
    let bin_m = SPEED_OF_LIGHT * wf.delay_resolution();
    range_profile_linear(image)
        .into_iter()
        .enumerate()
        .map(|(p, v)| ProfilePoint {
            delay_bin: p,
            differential_range_m: (p as f64 - los_bin as f64) * bin_m,
            value_db: if v > 0.0 {
                (10.0 * v.log10()).max(PROFILE_FLOOR_DB)
            } else {
                PROFILE_FLOOR_DB
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::Modulation;

    fn flat(h: f64) -> ComplexGrid {
        ComplexGrid::from_fn(4, 4, |_, _| Complex64::new(h, 0.0))
    }

    #[test]
    fn pd_basics() {
        assert_eq!(empirical_pd(&[true; 5]).unwrap(), 1.0);
        assert_eq!(empirical_pd(&[false; 5]).unwrap(), 0.0);
        let half: Vec<bool> = (0..500).map(|i| i < 250).collect();
        assert_eq!(empirical_pd(&half).unwrap(), 0.5);
        assert!(empirical_pd(&[]).is_err());
        assert!((pd_stderr(0.5, 100) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn rate_formula() {
        assert_eq!(achievable_rate(2.0, 100.0).unwrap().rate, 0.0);
        assert_eq!(achievable_rate(2.0, 0.0).unwrap().rate, 2.0);
        assert!((achievable_rate(2.0, 5.0).unwrap().rate - 1.9).abs() < 1e-15);
        assert!(achievable_rate(2.0, 101.0).is_err());
    }

    #[test]
    fn mi_limits() {
        let q = Constellation::new(Modulation::Qpsk);
        let hi = mutual_information(&q, &flat(1.0), 0.01, 20_000, 1).unwrap();
        assert!((hi - 2.0).abs() <= 0.01, "{hi}");
        let lo = mutual_information(&q, &flat(1.0), 1e6, 20_000, 1).unwrap();
        assert!(lo < 0.01, "{lo}");
        assert_eq!(mutual_information(&q, &flat(1.0), f64::INFINITY, 10, 1).unwrap(), 0.0);
        assert!(mutual_information(&q, &flat(1.0), 1.0, 0, 1).is_err());
    }

    #[test]
    fn mi_is_reproducible_across_pools() {
        let c = Constellation::new(Modulation::Qam16);
        let h = flat(0.8);
        let a = mutual_information(&c, &h, 0.1, 10_000, 5).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| mutual_information(&c, &h, 0.1, 10_000, 5).unwrap());
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn profile_peak_and_floor() {
        let mut img = RealGrid::zeros(16, 4);
        img[(3, 2)] = 5.0;
        img[(7, 0)] = 0.5;
        let wf = WaveformConfig {
            subcarriers: 16,
            symbols: 4,
            ..WaveformConfig::default()
        };
        let prof = range_profile(&img, &wf, 3);
        assert_eq!(prof[3].value_db, 0.0);
        assert_eq!(prof[3].differential_range_m, 0.0);
        assert!((prof[7].value_db + 10.0).abs() < 1e-12);
        assert_eq!(prof[0].value_db, PROFILE_FLOOR_DB);
        let zero = range_profile(&RealGrid::zeros(16, 4), &wf, 0);
        assert!(zero.iter().all(|p| p.value_db == PROFILE_FLOOR_DB));
    }
}
