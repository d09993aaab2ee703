//! Coherent coupling of Hermite-Gaussian cavity modes to spheroidal ion
//! Coulomb crystals.
//!
//! * [`beam`]: mode geometry, amplitudes and the standing-wave phase.
//! * [`crystal`]: spheroid geometry and uniform sampling.
//! * [`coupling`]: the collective coupling rate `G_mn` by three methods.
//! * [`spectroscopy`]: broadened cavity linewidth, synthetic scans and fits.
//! * [`sweeps`]: displacement, radius and detuning experiments.
//! * [`config`], [`output`], [`cli`]: the `cavicrys` command-line tool.
//! * [`selftest`]: invariant checks shared by the tool and the test suite.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beam;
pub mod cli;
pub mod config;
pub mod coupling;
pub mod crystal;
pub mod error;
mod lm;
pub mod output;
pub mod quadrature;
pub mod selftest;
pub mod spectroscopy;
pub mod sweeps;

pub use beam::{BeamGeometry, ModeIndex};
pub use coupling::{CouplingConfig, CouplingResult, Method};
pub use crystal::CrystalSpec;
pub use error::{Error, Result};
