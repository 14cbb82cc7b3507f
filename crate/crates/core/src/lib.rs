//! Bistatic OFDM integrated sensing and communication (ISAC) simulator.
//!
//! The crate models a multi-antenna transmitter sending an OFDM frame of
//! pilots and data to a co-located sensing/communication receiver. The
//! receiver sees `Y = X ⊙ H + Z` on the subcarrier × symbol grid and runs a
//! multi-stage chain:
//!
//! 1. pilot-only channel estimate, delay-Doppler image, CFAR, LS gain fit
//!    and structured reconstruction,
//! 2. LMMSE data demodulation,
//! 3. data-aided channel refinement (reciprocal, matched or LMMSE filter),
//!    iterated with stage 2,
//! 4. final delay-Doppler detection on the combined estimate.
//!
//! Pilot-only and genie-aided (known data) receivers are provided as
//! benchmarks, and [`harness`] runs Monte Carlo sweeps of the empirical
//! probability of detection against achievable rate.

pub mod channel;
pub mod detect;
mod error;
pub mod grid;
pub mod harness;
pub mod metrics;
pub mod ofdm;
pub mod receiver;
pub mod scenario;
pub mod seed;

pub use error::{Error, Result};
pub use grid::{ComplexGrid, Grid, RealGrid};
pub use num_complex::Complex64;
