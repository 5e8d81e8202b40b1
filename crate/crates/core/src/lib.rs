//! Light storage in ground-state Zeeman coherences of cold atoms under
//! static inhomogeneous magnetic fields.
//!
//! [`dynamics`] integrates the Bloch equations of one homogeneous
//! sub-sample through a write / dark / read sequence, [`ensemble`] sums the
//! retrieved coherence over a distribution of local fields, [`classical`]
//! is the precessing-dipole analogue, and [`analysis`] reduces traces to
//! decay times and oscillation frequencies.

pub mod analysis;
pub mod atomic;
pub mod classical;
pub mod config;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod presets;
pub mod run;

pub use error::{Error, Result};
