//! Numerics for the geometric last-passage percolation / discrete PNG model:
//! exact multi-point probabilities as contour integrals of block determinants,
//! their KPZ scaling limits, and the oracles used to validate both.
//!
//! The crate is `no_std` (with `alloc`); IO, CLI and thread pools live in the
//! `kpz` crate.
#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod airy;
pub mod asymptotic;
pub mod chain;
pub mod error;
pub mod exact;
pub mod exec;
pub mod growth;
pub mod integrands;
pub mod linalg;
pub mod math;
pub mod oracle;
pub mod params;
pub mod quad;
pub mod theta;
pub mod tw;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
