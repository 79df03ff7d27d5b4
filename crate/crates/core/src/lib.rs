//! Blind channel equalization with a constant-modulus semidefinite relaxation.
//!
//! The crate is organized bottom-up:
//!
//! * [`signal`] generates frames, runs them through a dispersive channel and
//!   builds the regressor windows every constant-modulus expression uses.
//! * [`gf2`] holds the binary code machinery: parity-check matrices, alist
//!   I/O, systematic encoding, the asymmetry test and the parity-polytope
//!   inequalities.
//! * [`conic`] is a self-contained operator-splitting solver for conic
//!   programs over zero, nonnegative, second-order and PSD cones.
//! * [`formulation`] compiles the plain constant-modulus SDP and its
//!   code-constrained extension into [`conic::ConicProblem`]s.
//! * [`recovery`] turns a relaxed solution back into an equalizer, bits and
//!   scores.
//! * [`pipeline`] runs trials and Monte-Carlo sweeps, including the CMA and
//!   MMSE reference equalizers.

pub mod conic;
pub mod error;
pub mod formulation;
pub mod gf2;
pub mod pipeline;
pub mod recovery;
pub mod signal;

pub use error::{Error, Result};

/// Complex baseband sample.
pub type C64 = num_complex::Complex<f64>;
