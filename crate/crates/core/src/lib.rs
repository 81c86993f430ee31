//! Lensfree in-line holography toolkit.
//!
//! Simulates holograms of synthetic specimens, recovers phase with multi-height
//! iterative retrieval, estimates the sample-to-sensor distance, fuses sub-pixel
//! shifted frames, scores reconstructions, and exports paired training data.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autofocus;
pub mod dataset;
pub mod error;
pub mod fft;
pub mod field;
pub mod forward;
pub mod io;
pub mod metrics;
pub mod propagation;
pub mod psr;
pub mod retrieval;

pub use error::{Error, Result};
pub use field::{ComplexField, Mask, OpticalConfig, RealImage};
pub use num_complex::Complex64;
