use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Supported data modulations. All are square, Gray-labelled QAM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "qpsk")]
    Qpsk,
    #[serde(rename = "16qam")]
    Qam16,
    #[serde(rename = "64qam")]
    Qam64,
    #[serde(rename = "256qam")]
    Qam256,
    #[serde(rename = "1024qam")]
    Qam1024,
}

impl Modulation {
    pub const ALL: [Modulation; 5] = [
        Modulation::Qpsk,
        Modulation::Qam16,
        Modulation::Qam64,
        Modulation::Qam256,
        Modulation::Qam1024,
    ];

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
            Modulation::Qam256 => 8,
            Modulation::Qam1024 => 10,
        }
    }

    pub fn order(self) -> usize {
        1 << self.bits_per_symbol()
    }

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Qpsk => "qpsk",
            Modulation::Qam16 => "16qam",
            Modulation::Qam64 => "64qam",
            Modulation::Qam256 => "256qam",
            Modulation::Qam1024 => "1024qam",
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase().replace(['-', '_'], "");
        Modulation::ALL
            .into_iter()
            .find(|m| m.name() == lower)
            .ok_or_else(|| Error::config(format!("unknown modulation {s:?}")))
    }
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

fn gray_inverse(mut g: usize) -> usize {
    let mut i = g;
    while g > 0 {
        g >>= 1;
        i ^= g;
    }
    i
}

/// Unit-average-energy square QAM alphabet with Gray labels.
///
/// `points()[label]` is the symbol for the bit label `label`, read MSB
/// first. The upper half of the label selects the in-phase level and the
/// lower half the quadrature level; each half is Gray coded along its axis,
/// with level 0 at the most positive amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    modulation: Modulation,
    points: Vec<Complex64>,
    bits_per_axis: usize,
    levels: usize,
    scale: f64,
}

impl Constellation {
    pub fn new(modulation: Modulation) -> Self {
        let bits = modulation.bits_per_symbol();
        let bits_per_axis = bits / 2;
        let levels = 1usize << bits_per_axis;
        let order = modulation.order();
        let scale = 1.0 / ((2.0 / 3.0) * (order as f64 - 1.0)).sqrt();
        let amplitude = |level: usize| (levels as f64 - 1.0 - 2.0 * level as f64) * scale;
        let points = (0..order)
            .map(|label| {
                let i_level = gray_inverse(label >> bits_per_axis);
                let q_level = gray_inverse(label & (levels - 1));
                Complex64::new(amplitude(i_level), amplitude(q_level))
            })
            .collect();
        Self {
            modulation,
            points,
            bits_per_axis,
            levels,
            scale,
        }
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_axis
    }

    fn label_of(&self, bits: &[bool]) -> usize {
        bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    /// Maps a bit stream to symbols, `bits_per_symbol` bits per symbol.
    pub fn modulate(&self, bits: &[bool]) -> Result<Vec<Complex64>> {
        let k = self.bits_per_symbol();
        if !bits.len().is_multiple_of(k) {
            return Err(Error::PayloadLength {
                expected: bits.len().div_ceil(k) * k,
                got: bits.len(),
            });
        }
        Ok(bits.chunks(k).map(|c| self.points[self.label_of(c)]).collect())
    }

    pub fn push_label_bits(&self, label: usize, out: &mut Vec<bool>) {
        let k = self.bits_per_symbol();
        out.extend((0..k).rev().map(|b| (label >> b) & 1 == 1));
    }

    /// Nearest level along one axis, ties resolved toward the smaller Gray code.
    fn axis_gray(&self, coordinate: f64) -> usize {
        if self.levels == 1 {
            return 0;
        }
        let u = coordinate / self.scale;
        let top = self.levels as f64 - 1.0;
        let t = ((top - u) / 2.0).floor();
        let lo = if t.is_nan() {
            0
        } else {
            t.clamp(0.0, (self.levels - 2) as f64) as usize
        };
        let hi = lo + 1;
        let d_lo = (u - (top - 2.0 * lo as f64)).abs();
        let d_hi = (u - (top - 2.0 * hi as f64)).abs();
        let (g_lo, g_hi) = (gray(lo), gray(hi));
        if d_lo < d_hi || (d_lo == d_hi && g_lo < g_hi) {
            g_lo
        } else {
            g_hi
        }
    }

    /// Label of the Euclidean-nearest point.
    pub fn nearest_label(&self, y: Complex64) -> usize {
        (self.axis_gray(y.re) << self.bits_per_axis) | self.axis_gray(y.im)
    }

    pub fn nearest_point(&self, y: Complex64) -> Complex64 {
        self.points[self.nearest_label(y)]
    }

    /// Hard decisions: nearest points and their Gray labels.
    pub fn demap_hard(&self, symbols: &[Complex64]) -> (Vec<Complex64>, Vec<bool>) {
        let mut points = Vec::with_capacity(symbols.len());
        let mut bits = Vec::with_capacity(symbols.len() * self.bits_per_symbol());
        for &y in symbols {
            let label = self.nearest_label(y);
            points.push(self.points[label]);
            self.push_label_bits(label, &mut bits);
        }
        (points, bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    /// Brute-force nearest point with first-index tie-break.
    fn brute_force(c: &Constellation, y: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in c.points().iter().enumerate() {
            let d = (y - p).norm_sqr();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    #[test]
    fn qpsk_gray_corners() {
        let c = Constellation::new(Modulation::Qpsk);
        let s = c.modulate(&[false, false, true, true, false, true]).unwrap();
        let close = |a: Complex64, re: f64, im: f64| (a - Complex64::new(re, im)).norm() < 1e-15;
        assert!(close(s[0], FRAC_1_SQRT_2, FRAC_1_SQRT_2));
        assert!(close(s[1], -FRAC_1_SQRT_2, -FRAC_1_SQRT_2));
        assert!(close(s[2], FRAC_1_SQRT_2, -FRAC_1_SQRT_2));
    }

    #[test]
    fn unit_average_energy_and_gray_neighbours() {
        for m in Modulation::ALL {
            let c = Constellation::new(m);
            assert_eq!(c.order(), 1 << c.bits_per_symbol());
            let mean: f64 = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / c.order() as f64;
            assert_relative_eq!(mean, 1.0, max_relative = 1e-12);
            // Horizontally or vertically adjacent points differ in exactly one bit.
            let spacing = 2.0 * c.scale;
            for (a, pa) in c.points().iter().enumerate() {
                for (b, pb) in c.points().iter().enumerate() {
                    if ((pa - pb).norm() - spacing).abs() < 1e-9 {
                        assert_eq!((a ^ b).count_ones(), 1, "{m}: labels {a} and {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn nearest_quadrant() {
        let c = Constellation::new(Modulation::Qpsk);
        let (pts, bits) = c.demap_hard(&[Complex64::new(0.9, 0.1)]);
        assert!((pts[0] - Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2)).norm() < 1e-15);
        assert_eq!(bits, vec![false, false]);
    }

    #[test]
    fn boundary_ties_pick_smaller_index() {
        for m in Modulation::ALL {
            let c = Constellation::new(m);
            let origin = Complex64::new(0.0, 0.0);
            assert_eq!(c.nearest_label(origin), brute_force(&c, origin), "{m}");
            // Midpoint between two horizontally adjacent points.
            let mid = (c.points()[0] + c.points()[c.order() / 2]) / 2.0;
            assert_eq!(c.nearest_label(mid), brute_force(&c, mid), "{m}");
        }
        let q = Constellation::new(Modulation::Qpsk);
        assert_eq!(q.nearest_label(Complex64::new(0.0, 0.0)), 0);
    }

    #[test]
    fn far_outside_clamps_to_corner() {
        let c = Constellation::new(Modulation::Qam16);
        let y = Complex64::new(-100.0, 100.0);
        assert_eq!(c.nearest_label(y), brute_force(&c, y));
    }

    #[test]
    fn name_parsing() {
        assert_eq!("1024-QAM".parse::<Modulation>().unwrap(), Modulation::Qam1024);
        assert_eq!("qpsk".parse::<Modulation>().unwrap(), Modulation::Qpsk);
        assert!("8psk".parse::<Modulation>().is_err());
    }

    #[test]
    fn modulate_rejects_partial_symbols() {
        let c = Constellation::new(Modulation::Qam16);
        assert!(matches!(c.modulate(&[true; 6]), Err(Error::PayloadLength { .. })));
    }

    proptest! {
        #[test]
        fn demap_inverts_modulate(m in prop::sample::select(Modulation::ALL.to_vec()), labels in prop::collection::vec(0usize..1024, 1..50)) {
            let c = Constellation::new(m);
            let mut bits = Vec::new();
            for l in &labels {
                c.push_label_bits(l % c.order(), &mut bits);
            }
            let symbols = c.modulate(&bits).unwrap();
            let (points, decoded) = c.demap_hard(&symbols);
            prop_assert_eq!(points, symbols);
            prop_assert_eq!(decoded, bits);
        }

        #[test]
        fn fast_slicer_matches_brute_force(m in prop::sample::select(Modulation::ALL.to_vec()), re in -1.6f64..1.6, im in -1.6f64..1.6) {
            let c = Constellation::new(m);
            let y = Complex64::new(re, im);
            prop_assert_eq!(c.nearest_label(y), brute_force(&c, y));
        }
    }
}
