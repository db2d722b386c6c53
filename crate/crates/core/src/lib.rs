//! Partial circulant approximation of linear dimensionality-reduction operators.
//!
//! The crate is `no_std` (with `alloc`) and contains only numerics:
//!
//! - [`circulant`]: circulant algebra and FFT-backed application,
//! - [`rubik`]: the optimal partial circulant approximation error and its
//!   shift-assignment search (exact enumeration and a greedy heuristic),
//! - [`learner`]: alternating minimization for `A ~ P S C` over a data matrix,
//! - [`montecarlo`]: tail-probability and random-projection experiments,
//! - [`dataset`]: PCA operators, splits and synthetic data.
//!
//! File formats, parallel runners, benchmarks and the command line live in
//! the companion `circsketch` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod circulant;
pub mod dataset;
pub mod error;
pub mod fft;
pub mod learner;
pub mod matrix;
pub mod montecarlo;
pub mod rng;
pub mod rubik;

pub use circulant::{
    circ_apply, circ_apply_adjoint, circ_row, circ_to_dense, partial_apply, partial_to_dense,
    rotate_left, rotate_right, Circulant, Generator, PartialCirculantOp, ShiftAssignment,
};
pub use error::{Error, Result};
pub use matrix::DenseMatrix;
