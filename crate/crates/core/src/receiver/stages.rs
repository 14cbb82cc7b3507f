use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{ChannelEstimate, Estimator, GainFit, Support};
use crate::channel::RxFrame;
use crate::ofdm::{PilotPattern, TxFrame};
use crate::{ComplexGrid, Error, Result};

/// Stage 1: `Ĥ_P = Y_P ⊘ X_P`, zero on data cells.
pub fn stage1_pilot_estimate(y: &RxFrame, x: &TxFrame) -> Result<ChannelEstimate> {
    if y.y.shape() != x.x.shape() {
        return Err(Error::Dimension {
            expected: x.x.shape(),
            got: y.y.shape(),
        });
    }
    if x.pilots.is_empty() {
        return Err(Error::EmptyPilotSet);
    }
    let (n, m) = x.x.shape();
    let mut h = ComplexGrid::zeros(n, m);
    let (ys, xs) = (y.y.as_slice(), x.x.as_slice());
    let out = h.as_mut_slice();
    for &i in x.pilots.pilot_cells() {
        out[i] = ys[i] / xs[i];
    }
    Ok(ChannelEstimate {
        h_hat: h,
        pilots: x.pilots.clone(),
        support: Support::Pilots,
    })
}

/// `e^{-j2πnp/N}` for n = 0..N-1, with the exponent reduced modulo N.
fn bin_phasors(len: usize, bin: usize, sign: f64) -> Vec<Complex64> {
    (0..len)
        .map(|i| {
            let k = (i * bin) % len;
            Complex64::from_polar(1.0, sign * 2.0 * PI * k as f64 / len as f64)
        })
        .collect()
}

/// Removes repeated bins, keeping the first occurrence.
pub fn dedupe_bins(bins: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(bins.len());
    for &b in bins {
        if out.contains(&b) {
            log::warn!("duplicate detection at bin {b:?} dropped from the gain fit");
        } else {
            out.push(b);
        }
    }
    out
}

struct Atoms {
    freq: Vec<Vec<Complex64>>,
    time: Vec<Vec<Complex64>>,
}

impl Atoms {
    fn new(rows: usize, cols: usize, bins: &[(usize, usize)]) -> Self {
        Self {
            freq: bins.iter().map(|&(p, _)| bin_phasors(rows, p, -1.0)).collect(),
            time: bins.iter().map(|&(_, q)| bin_phasors(cols, q, 1.0)).collect(),
        }
    }

    fn at(&self, k: usize, n: usize, m: usize) -> Complex64 {
        self.freq[k][n] * self.time[k][m]
    }
}

/// Least-squares path gains for the given delay-Doppler bins.
///
/// Column `k` of the model is `vec(b(τ̂_k) c(ν̂_k)ᵀ)`. The fit uses the
/// cells in the estimate's support when `fit` is [`GainFit::Support`], or
/// every grid cell (treating unobserved cells as zeros) for
/// [`GainFit::FullGrid`]. Duplicate bins are dropped with a warning; the
/// returned gains follow the order of the deduplicated bins.
pub fn ls_gains(h_hat: &ChannelEstimate, bins: &[(usize, usize)], fit: GainFit) -> Vec<Complex64> {
    let bins = dedupe_bins(bins);
    let k = bins.len();
    if k == 0 {
        return Vec::new();
    }
    let (rows, cols) = h_hat.h_hat.shape();
    let atoms = Atoms::new(rows, cols, &bins);
    let mut gram = DMatrix::<Complex64>::zeros(k, k);
    let mut rhs = DVector::<Complex64>::zeros(k);
    let mut a = vec![Complex64::default(); k];
    let h = h_hat.h_hat.as_slice();
    let mut accumulate = |i: usize| {
        let (n, m) = (i % rows, i / rows);
        for (j, aj) in a.iter_mut().enumerate() {
            *aj = atoms.at(j, n, m);
        }
        for r in 0..k {
            let ar = a[r].conj();
            rhs[r] += ar * h[i];
            for c in 0..k {
                gram[(r, c)] += ar * a[c];
            }
        }
    };
    match (fit, h_hat.support) {
        (GainFit::Support, Support::Pilots) => h_hat.pilots.pilot_cells().iter().for_each(|&i| accumulate(i)),
        _ => (0..rows * cols).for_each(&mut accumulate),
    }
    let solution = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => {
            log::warn!("singular gain-fit Gram matrix; using the pseudo-inverse");
            let pinv = gram.pseudo_inverse(1e-12).expect("non-negative tolerance");
            pinv * rhs
        }
    };
    solution.iter().copied().collect()
}

/// `Σ_k α̂_k b(τ̂_k) c(ν̂_k)ᵀ` over the full grid.
pub fn reconstruct_channel(gains: &[Complex64], bins: &[(usize, usize)], shape: (usize, usize)) -> ComplexGrid {
    assert_eq!(gains.len(), bins.len(), "one gain per bin");
    let (rows, cols) = shape;
    let atoms = Atoms::new(rows, cols, bins);
    let mut h = ComplexGrid::zeros(rows, cols);
    for (k, &g) in gains.iter().enumerate() {
        for m in 0..cols {
            let s = g * atoms.time[k][m];
            for (out, &b) in h.column_mut(m).iter_mut().zip(&atoms.freq[k]) {
                *out += s * b;
            }
        }
    }
    h
}

/// Stage 2: `X̂_D = (Y_D ⊙ Ĥ*_D) ⊘ (|Ĥ_D|² + 1/SNR_x)`. Pilot cells are left at zero.
pub fn lmmse_demod(y: &ComplexGrid, h_hat: &ComplexGrid, pilots: &PilotPattern, snr_x: f64) -> ComplexGrid {
    let reg = 1.0 / snr_x;
    let mut x = ComplexGrid::zeros(y.rows(), y.cols());
    let (ys, hs) = (y.as_slice(), h_hat.as_slice());
    let out = x.as_mut_slice();
    for &i in pilots.data_cells() {
        out[i] = ys[i] * hs[i].conj() / (hs[i].norm_sqr() + reg);
    }
    x
}

/// `1/x`, taken as the conjugate when `x` is unit-modulus to rounding
/// precision so that RF and MF agree exactly on constant-modulus symbols.
fn reciprocal(x: Complex64) -> Complex64 {
    let n2 = x.norm_sqr();
    if (n2 - 1.0).abs() <= 4.0 * f64::EPSILON {
        x.conj()
    } else {
        x.conj() / n2
    }
}

/// Stage 3: data-aided estimate on the data cells, pilot cells copied from `stage1`.
pub fn refine_channel(
    y: &ComplexGrid,
    x_hat: &ComplexGrid,
    stage1: &ChannelEstimate,
    estimator: Estimator,
    snr_h: f64,
) -> Result<ChannelEstimate> {
    let rows = y.rows();
    let mut h = ComplexGrid::zeros(rows, y.cols());
    let (ys, xs) = (y.as_slice(), x_hat.as_slice());
    let out = h.as_mut_slice();
    let reg = 1.0 / snr_h;
    for &i in stage1.pilots.data_cells() {
        let (yv, xv) = (ys[i], xs[i]);
        out[i] = match estimator {
            Estimator::Rf => {
                let magnitude = xv.norm();
                if magnitude < 1e-12 {
                    return Err(Error::VanishingSymbol {
                        subcarrier: i % rows,
                        symbol: i / rows,
                        magnitude,
                    });
                }
                reciprocal(xv) * yv
            }
            Estimator::Mf => yv * xv.conj(),
            Estimator::Lmmse => yv * xv.conj() / (xv.norm_sqr() + reg),
        };
    }
    let s1 = stage1.h_hat.as_slice();
    for &i in stage1.pilots.pilot_cells() {
        out[i] = s1[i];
    }
    Ok(ChannelEstimate {
        h_hat: h,
        pilots: stage1.pilots.clone(),
        support: Support::Full,
    })
}
