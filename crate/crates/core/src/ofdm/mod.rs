//! Frequency–time grid bookkeeping: pilot placement, constellations and
//! transmit frame assembly.

mod constellation;
mod pilots;

use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

pub use constellation::{Constellation, Modulation};
pub use pilots::PilotPattern;

use crate::seed::{self, Stream};
use crate::{ComplexGrid, Error, Result};

/// Source of the payload bits.
#[derive(Debug, Clone)]
pub enum Payload {
    Bits(Vec<bool>),
    /// Uniform random bits drawn from this seed.
    Seed(u64),
}

/// The transmit grid `X` with its pilot pattern and payload.
#[derive(Debug, Clone)]
pub struct TxFrame {
    pub x: ComplexGrid,
    pub pilots: Arc<PilotPattern>,
    pub constellation: Arc<Constellation>,
    pub payload_bits: Vec<bool>,
}

impl TxFrame {
    pub fn shape(&self) -> (usize, usize) {
        self.x.shape()
    }

    /// Transmitted symbols on the data cells, in linear-index order.
    pub fn data_symbols(&self) -> Vec<Complex64> {
        let x = self.x.as_slice();
        self.pilots.data_cells().iter().map(|&i| x[i]).collect()
    }
}

/// Unit-modulus pilot symbols `e^{j(π/4 + kπ/2)}` keyed by the pattern seed.
pub fn pilot_symbols(pilots: &PilotPattern) -> Vec<Complex64> {
    let mut rng = seed::rng(seed::derive(pilots.seed(), Stream::PilotSymbols, 0));
    (0..pilots.len())
        .map(|_| {
            let k: u8 = rng.random_range(0..4);
            Complex64::from_polar(1.0, FRAC_PI_4 * (1 + 2 * k) as f64)
        })
        .collect()
}

/// Uniform random payload of `len` bits.
pub fn random_bits(seed: u64, len: usize) -> Vec<bool> {
    let mut rng = seed::rng(seed::derive(seed, Stream::DataBits, 0));
    (0..len).map(|_| rng.random()).collect()
}

/// Assembles `X`: unit-modulus pilots on the pilot cells, Gray-mapped
/// payload on the data cells.
pub fn build_tx_frame(
    pilots: Arc<PilotPattern>,
    constellation: Arc<Constellation>,
    payload: Payload,
) -> Result<TxFrame> {
    let (rows, cols) = pilots.shape();
    let needed = pilots.data_cells().len() * constellation.bits_per_symbol();
    let payload_bits = match payload {
        Payload::Bits(bits) => {
            if bits.len() != needed {
                return Err(Error::PayloadLength {
                    expected: needed,
                    got: bits.len(),
                });
            }
            bits
        }
        Payload::Seed(s) => random_bits(s, needed),
    };
    let symbols = constellation.modulate(&payload_bits)?;

    let mut x = ComplexGrid::zeros(rows, cols);
    let buf = x.as_mut_slice();
    for (&i, s) in pilots.pilot_cells().iter().zip(pilot_symbols(&pilots)) {
        buf[i] = s;
    }
    for (&i, s) in pilots.data_cells().iter().zip(symbols) {
        buf[i] = s;
    }
    Ok(TxFrame {
        x,
        pilots,
        constellation,
        payload_bits,
    })
}
