//! Structured ISAC channel synthesis and the AWGN observation model.
//!
//! The channel on the N × M subcarrier × symbol grid is
//! `H = Σ_k α_k b(τ_k) c(ν_k)ᵀ` with `[b(τ)]_n = e^{-j2πnΔfτ}` and
//! `[c(ν)]_m = e^{j2πmT_symν}`, and the receiver observes `Y = X ⊙ H + Z`.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path as FsPath;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::ofdm::TxFrame;
use crate::scenario::{PathSet, WaveformConfig};
use crate::seed;
use crate::{ComplexGrid, Error, Result};

/// Frequency-domain steering vector `b(τ)`.
pub fn steering_freq(tau: f64, n: usize, df: f64) -> Vec<Complex64> {
    let step = -2.0 * PI * df * tau;
    (0..n).map(|i| Complex64::from_polar(1.0, step * i as f64)).collect()
}

/// Slow-time steering vector `c(ν)`.
pub fn steering_time(nu: f64, m: usize, t_sym: f64) -> Vec<Complex64> {
    let step = 2.0 * PI * t_sym * nu;
    (0..m).map(|i| Complex64::from_polar(1.0, step * i as f64)).collect()
}

/// Delay of delay bin `p`.
pub fn bin_delay(p: f64, wf: &WaveformConfig) -> f64 {
    p * wf.delay_resolution()
}

/// Doppler of Doppler bin `q`. Bins at or above M/2 map to negative Doppler.
pub fn bin_doppler(q: usize, wf: &WaveformConfig) -> f64 {
    signed_doppler_bin(q, wf.symbols) as f64 * wf.doppler_resolution()
}

/// Interprets Doppler bin `q` modulo `m` as a signed index in `[-m/2, m/2)`.
pub fn signed_doppler_bin(q: usize, m: usize) -> i64 {
    let q = (q % m) as i64;
    let m = m as i64;
    if q >= m - m / 2 {
        q - m
    } else {
        q
    }
}

/// Nearest grid bin of a delay/Doppler pair, reduced modulo the grid.
pub fn nearest_bin(delay_s: f64, doppler_hz: f64, wf: &WaveformConfig) -> (usize, usize) {
    let p = (delay_s / wf.delay_resolution()).round() as i64;
    let q = (doppler_hz / wf.doppler_resolution()).round() as i64;
    (
        p.rem_euclid(wf.subcarriers as i64) as usize,
        q.rem_euclid(wf.symbols as i64) as usize,
    )
}

/// Moves every path onto its nearest delay/Doppler bin, keeping gains.
pub fn snap_to_grid(paths: &PathSet, wf: &WaveformConfig) -> PathSet {
    let mut out = paths.clone();
    for p in &mut out.paths {
        p.delay_s = (p.delay_s / wf.delay_resolution()).round() * wf.delay_resolution();
        p.doppler_hz = (p.doppler_hz / wf.doppler_resolution()).round() * wf.doppler_resolution();
    }
    out
}

/// A synthesized channel together with the paths that produced it.
#[derive(Debug, Clone)]
pub struct ChannelMatrix {
    pub h: ComplexGrid,
    pub paths: PathSet,
}

/// Evaluates the sum of rank-one path contributions on the full grid.
pub fn synthesize_channel(paths: &PathSet, wf: &WaveformConfig) -> ChannelMatrix {
    let (n, m) = wf.grid_shape();
    let mut h = ComplexGrid::zeros(n, m);
    for p in &paths.paths {
        let b = steering_freq(p.delay_s, n, wf.subcarrier_spacing_hz);
        let c = steering_time(p.doppler_hz, m, wf.symbol_duration());
        for (col, &cm) in c.iter().enumerate() {
            let scale = p.gain * cm;
            for (out, &bn) in h.column_mut(col).iter_mut().zip(&b) {
                *out += scale * bn;
            }
        }
    }
    ChannelMatrix {
        h,
        paths: paths.clone(),
    }
}

/// The received grid, with the ground truth carried along for scoring.
#[derive(Debug, Clone)]
pub struct RxFrame {
    pub y: ComplexGrid,
    pub truth: PathSet,
}

/// Fills `out` with i.i.d. CN(0, σ²) samples.
pub fn fill_noise(out: &mut [Complex64], sigma2: f64, seed: u64) {
    let std = (sigma2 / 2.0).sqrt();
    let mut rng = seed::rng(seed);
    for z in out {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *z = Complex64::new(re * std, im * std);
    }
}

/// `Y = X ⊙ H + Z`, with `Z` drawn from `seed`. `σ² = 0` gives a noiseless frame.
pub fn apply_channel(x: &TxFrame, h: &ChannelMatrix, sigma2: f64, seed: u64) -> Result<RxFrame> {
    if x.x.shape() != h.h.shape() {
        return Err(Error::Dimension {
            expected: x.x.shape(),
            got: h.h.shape(),
        });
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::config(format!("noise variance {sigma2} is not a finite non-negative number")));
    }
    let (n, m) = h.h.shape();
    let mut y = ComplexGrid::zeros(n, m);
    if sigma2 > 0.0 {
        fill_noise(y.as_mut_slice(), sigma2, seed);
    }
    for ((out, &xv), &hv) in y.as_mut_slice().iter_mut().zip(x.x.iter()).zip(h.h.iter()) {
        *out += xv * hv;
    }
    Ok(RxFrame {
        y,
        truth: h.paths.clone(),
    })
}

#[derive(Serialize)]
struct GridSidecar<'a> {
    name: &'a str,
    rows: usize,
    cols: usize,
    dtype: &'a str,
    layout: &'a str,
}

/// Writes `grid` to `<dir>/<name>.bin` as little-endian f64 `re, im` pairs
/// in row-major (subcarrier-major) order, plus a `<name>.json` sidecar.
pub fn dump_grid(dir: &FsPath, name: &str, grid: &ComplexGrid) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join(format!("{name}.bin")))?);
    for n in 0..grid.rows() {
        for m in 0..grid.cols() {
            let v = grid[(n, m)];
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    let sidecar = GridSidecar {
        name,
        rows: grid.rows(),
        cols: grid.cols(),
        dtype: "complex128-le-interleaved",
        layout: "row-major",
    };
    let file = File::create(dir.join(format!("{name}.json")))?;
    serde_json::to_writer_pretty(file, &sidecar)?;
    Ok(())
}

/// Reads a grid written by [`dump_grid`].
pub fn load_grid(dir: &FsPath, name: &str) -> Result<ComplexGrid> {
    let meta: serde_json::Value =
        serde_json::from_reader(File::open(dir.join(format!("{name}.json")))?)?;
    let dim = |k: &str| {
        meta[k]
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| Error::config(format!("sidecar field {k} missing")))
    };
    let (rows, cols) = (dim("rows")?, dim("cols")?);
    let bytes = std::fs::read(dir.join(format!("{name}.bin")))?;
    if bytes.len() != rows * cols * 16 {
        return Err(Error::config(format!("{name}.bin has {} bytes, expected {}", bytes.len(), rows * cols * 16)));
    }
    let f = |i: usize| f64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().unwrap());
    Ok(ComplexGrid::from_fn(rows, cols, |n, m| {
        let k = 2 * (n * cols + m);
        Complex64::new(f(k), f(k + 1))
    }))
}
