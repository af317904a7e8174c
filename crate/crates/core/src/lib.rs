//! Intelligent-tire lateral force prediction.
//!
//! Tri-axial accelerometer streams from the tire inner liner are reduced to a
//! speed-independent contact patch grid ([`signal`]) and fed to an exact
//! Gaussian process with a Matérn-3/2 ARD kernel ([`gpr`], [`kernel`]).
//! [`synth`] stands in for the rig data, [`eval`] runs the studies and
//! [`io`] holds the file formats.

pub mod error;
pub mod eval;
pub mod io;
pub mod gpr;
pub mod kernel;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};
pub use faer::Mat;
