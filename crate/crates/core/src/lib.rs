//! Multi-mode photon–photon coupling in planar resonator systems.
//!
//! The crate is organised the way a measurement campaign is:
//!
//! * [`model`] builds the non-Hermitian coupled-mode matrix, solves for hybrid
//!   eigenmodes and carries the lossless circuit picture used as an oracle.
//! * [`spectrum`] synthesises |S21| feedline transmission and sweeps it across
//!   the resonator size `L`.
//! * [`analysis`] extracts dips, links them into branches and classifies each
//!   interaction region as level repulsion, level attraction or a plain crossing.
//! * [`fit`] recovers couplings and dampings from spectra.
//! * [`io`] and [`preset`] handle CSV/Touchstone data, TOML configuration and reports.
//!
//! All frequencies and rates are in GHz and all sizes in mm.

pub mod analysis;
mod error;
pub mod fit;
pub mod io;
mod linalg;
pub mod model;
pub mod preset;
pub mod spectrum;

pub use error::{Error, Result};
pub use num_complex::Complex64;
