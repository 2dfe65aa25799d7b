//! Growth-drift-diffusion-absorption model of mangled worlds.
//!
//! Worlds split at decoherence events; their log-size `x = ln m` diffuses with
//! drift `v` and variance rate `w`. Worlds that fall below a boundary trailing
//! the median measure by `ε` are mangled and removed. The model is solved
//! three independent ways:
//!
//! * [`analytic`]: closed forms for the world densities, the unmangled world
//!   count `W`, the two-stage count `λ` and the Born correction
//!   `γ(F) = erfc(−ln F / √(2wt₁))`;
//! * [`pde`]: a finite-difference solver of the comoving drift-diffusion
//!   equation with an absorbing wall;
//! * [`mc`]: a branching random walk over the binary world tree, with an
//!   exponentially tilted estimator for the rare survivors.
//!
//! [`born`] compares the engines on multi-outcome experiments.
//!
//! The crate is `no_std` (it needs `alloc`). Parallel execution and file
//! formats live in the companion `mangle-lab` crate.
#![no_std]
// `!(x > 0.0)` rejects NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analytic;
pub mod born;
mod error;
pub(crate) mod float;
pub mod mc;
pub mod oracle;
pub mod params;
pub mod pde;
pub mod quadrature;
pub mod special;
pub mod tridiag;

pub use error::{Error, Result};
pub use params::{DecoherenceParams, DiffusionParams, MeasureFraction};
pub use special::LogValue;
