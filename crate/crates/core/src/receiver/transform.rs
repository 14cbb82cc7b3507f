use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::{ComplexGrid, RealGrid};

/// Delay-Doppler periodogram `|F_Nᴴ Ĥ F_M|²` with unitary DFTs.
///
/// Bin `(p, q)` corresponds to delay `p/(NΔf)` and Doppler `q/(M T_sym)`.
/// Plans are built once and shared; `image` is safe to call concurrently.
#[derive(Clone)]
pub struct DelayDopplerTransform {
    rows: usize,
    cols: usize,
    delay: Arc<dyn Fft<f64>>,
    doppler: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for DelayDopplerTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DelayDopplerTransform")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish()
    }
}

impl DelayDopplerTransform {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            delay: planner.plan_fft_inverse(rows),
            doppler: planner.plan_fft_forward(cols),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Complex delay-Doppler response `F_Nᴴ Ĥ F_M`, column-major.
    pub fn response(&self, h: &ComplexGrid) -> ComplexGrid {
        assert_eq!(h.shape(), (self.rows, self.cols), "grid shape does not match the transform");
        let (n, m) = (self.rows, self.cols);
        let mut cols = h.as_slice().to_vec();
        let scratch_len = self
            .delay
            .get_inplace_scratch_len()
            .max(self.doppler.get_inplace_scratch_len());
        let mut scratch = vec![Complex64::default(); scratch_len];
        // Every column is one subcarrier vector of length N.
        self.delay.process_with_scratch(&mut cols, &mut scratch);

        let mut rows = vec![Complex64::default(); n * m];
        for (q, col) in cols.chunks_exact(n).enumerate() {
            for (p, &v) in col.iter().enumerate() {
                rows[p * m + q] = v;
            }
        }
        self.doppler.process_with_scratch(&mut rows, &mut scratch);

        let norm = 1.0 / ((n * m) as f64).sqrt();
        ComplexGrid::from_fn(n, m, |p, q| rows[p * m + q] * norm)
    }

    pub fn image(&self, h: &ComplexGrid) -> RealGrid {
        self.response(h).map(|v| v.norm_sqr())
    }
}
