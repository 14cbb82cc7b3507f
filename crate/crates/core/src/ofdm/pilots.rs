use std::io::Write;

use rand::seq::index;

use crate::seed::{self, Stream};
use crate::{Error, Result};

/// Pilot locations on the N × M grid. Everything else carries data.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotPattern {
    rows: usize,
    cols: usize,
    rho: f64,
    seed: u64,
    pilots: Vec<usize>,
    data: Vec<usize>,
    mask: Vec<bool>,
}

impl PilotPattern {
    /// Draws `round(ρNM/100)` distinct cells uniformly at random.
    ///
    /// The same `(n, m, rho, seed)` always yields the same pattern, and
    /// the seed also keys the pilot symbol values in the TX frame.
    pub fn generate(rows: usize, cols: usize, rho: f64, seed: u64) -> Result<Self> {
        if !(0.0..=100.0).contains(&rho) {
            return Err(Error::config(format!("pilot percentage {rho} outside [0, 100]")));
        }
        let total = rows * cols;
        let count = (rho * total as f64 / 100.0).round() as usize;
        let mut rng = seed::rng(seed::derive(seed, Stream::PilotPlacement, 0));
        let mut cells = index::sample(&mut rng, total, count.min(total)).into_vec();
        cells.sort_unstable();
        Ok(Self::from_sorted(rows, cols, rho, seed, cells))
    }

    /// Builds a pattern from explicit `(subcarrier, symbol)` pairs.
    pub fn from_cells(rows: usize, cols: usize, cells: &[(usize, usize)]) -> Result<Self> {
        let mut linear = Vec::with_capacity(cells.len());
        for &(n, m) in cells {
            if n >= rows || m >= cols {
                return Err(Error::config(format!("pilot cell ({n}, {m}) outside {rows}x{cols} grid")));
            }
            linear.push(n + rows * m);
        }
        linear.sort_unstable();
        if linear.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("duplicate pilot cell"));
        }
        let rho = 100.0 * linear.len() as f64 / (rows * cols) as f64;
        Ok(Self::from_sorted(rows, cols, rho, 0, linear))
    }

    fn from_sorted(rows: usize, cols: usize, rho: f64, seed: u64, pilots: Vec<usize>) -> Self {
        let mut mask = vec![false; rows * cols];
        for &i in &pilots {
            mask[i] = true;
        }
        let data = (0..rows * cols).filter(|&i| !mask[i]).collect();
        Self {
            rows,
            cols,
            rho,
            seed,
            pilots,
            data,
            mask,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Requested pilot percentage.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Pilot cells as sorted column-major linear indices.
    pub fn pilot_cells(&self) -> &[usize] {
        &self.pilots
    }

    /// Data cells as sorted column-major linear indices.
    pub fn data_cells(&self) -> &[usize] {
        &self.data
    }

    pub fn is_pilot(&self, linear: usize) -> bool {
        self.mask[linear]
    }

    pub fn len(&self) -> usize {
        self.pilots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pilots.is_empty()
    }

    /// Iterates pilot cells as `(subcarrier, symbol)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pilots.iter().map(move |&i| (i % self.rows, i / self.rows))
    }

    /// Writes the pilot index list as CSV with a `subcarrier,symbol` header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "subcarrier,symbol")?;
        for (n, m) in self.iter() {
            writeln!(w, "{n},{m}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_and_empty() {
        let full = PilotPattern::generate(8, 4, 100.0, 1).unwrap();
        assert_eq!(full.len(), 32);
        assert!(full.data_cells().is_empty());
        let none = PilotPattern::generate(8, 4, 0.0, 1).unwrap();
        assert!(none.is_empty());
        assert_eq!(none.data_cells().len(), 32);
    }

    #[test]
    fn reference_grid_count() {
        let p = PilotPattern::generate(400, 60, 5.0, 42).unwrap();
        assert_eq!(p.len(), 1200);
        assert_eq!(p.data_cells().len(), 24000 - 1200);
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        // 2.5% of 20 cells is 0.5 → 1.
        assert_eq!(PilotPattern::generate(5, 4, 2.5, 0).unwrap().len(), 1);
        // 12.5% of 12 cells is 1.5 → 2.
        assert_eq!(PilotPattern::generate(4, 3, 12.5, 0).unwrap().len(), 2);
    }

    #[test]
    fn out_of_range_rho() {
        assert!(PilotPattern::generate(4, 4, 101.0, 0).is_err());
        assert!(PilotPattern::generate(4, 4, -1.0, 0).is_err());
    }

    #[test]
    fn explicit_cells() {
        let p = PilotPattern::from_cells(4, 3, &[(1, 2), (0, 0)]).unwrap();
        assert_eq!(p.pilot_cells(), &[0, 9]);
        assert!(p.is_pilot(9));
        assert!(PilotPattern::from_cells(4, 3, &[(1, 2), (1, 2)]).is_err());
        assert!(PilotPattern::from_cells(4, 3, &[(4, 0)]).is_err());
    }

    #[test]
    fn csv_export() {
        let p = PilotPattern::from_cells(4, 3, &[(3, 1)]).unwrap();
        let mut out = Vec::new();
        p.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "subcarrier,symbol\n3,1\n");
    }

    proptest! {
        #[test]
        fn pattern_invariants(rows in 1usize..40, cols in 1usize..20, rho in 0.0f64..=100.0, seed: u64) {
            let p = PilotPattern::generate(rows, cols, rho, seed).unwrap();
            let total = rows * cols;
            prop_assert_eq!(p.len(), (rho * total as f64 / 100.0).round() as usize);
            prop_assert!(p.pilot_cells().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(p.pilot_cells().iter().all(|&i| i < total));
            prop_assert_eq!(p.len() + p.data_cells().len(), total);
            prop_assert_eq!(&p, &PilotPattern::generate(rows, cols, rho, seed).unwrap());
        }
    }
}
