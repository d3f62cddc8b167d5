//! Simulation of a lens-embedded massive-MIMO downlink.
//!
//! The pipeline runs from scalar beam propagation through a dielectric lens
//! ([`waveoptics`]) to per-antenna power profiles, which shape correlated
//! Rayleigh channels ([`channel`]). Users quantize their channel direction
//! against random or profile-weighted codebooks ([`feedback`]) and the base
//! station precodes from the fed-back directions ([`linklevel`]).
//!
//! ```
//! use lensmimo::linklevel::sum_rate;
//! assert_eq!(sum_rate(&[3.0, 3.0]), 4.0);
//! ```

// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod feedback;
pub mod io;
pub mod linklevel;
pub mod rng;
mod summation;
pub mod waveoptics;

pub use error::{Error, ErrorCategory, Result};

pub use num_complex::Complex64;
