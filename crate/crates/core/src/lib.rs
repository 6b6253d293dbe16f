//! Kernels, spectra and random walks on metric graphs.
//!
//! The heat and polyharmonic semigroups are built from their line profiles by
//! summing over paths weighted with transfer coefficients. Around that sit a
//! vertex reduction of the spectral problem on equilateral graphs, Walsh
//! Brownian motion with Feynman-Kac weights, moment asymptotics for the
//! parabolic Anderson model, and a finite-difference reference solver.

pub mod cli;
pub mod edgefn;
pub mod error;
pub mod graph;
pub mod kernel;
pub mod oracle;
pub mod pam;
pub mod profile;
pub mod quad;
pub mod spectral;
pub mod stats;
pub mod stochastic;

pub use error::{Error, Result};
