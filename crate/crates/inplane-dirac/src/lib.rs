//! Dirac transport with in-plane magnetic fields.
//!
//! * [`spin`]: rotated and cylindrical Pauli frames, charge conjugation.
//! * [`gauge`]: the in-plane gauge scalar, coordinate quantization, Hall current,
//!   and finite-difference checks of the gauge-removed Dirac equation.
//! * [`zeromodes`]: Aharonov-Casher zero modes of a lattice Dirac operator.
//! * [`ring`]: Rashba ring spin filter, its phases and its two-lead S-matrix.
//! * [`table`]: result tables with CSV and JSON emitters.

pub mod error;
pub mod gauge;
pub mod lambert;
pub mod linalg;
pub mod ring;
pub mod spin;
pub mod table;
pub mod zeromodes;

pub use error::{Error, Result};
pub use spin::{C64, Spinor2, SpinOperator, ChargeConjugation};
