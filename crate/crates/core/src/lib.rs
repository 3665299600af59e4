//! Permutation projections of finite Markov chains.
//!
//! The crate is organised around a handful of modules:
//!
//! * [`chain`]: validated stochastic matrices, distributions and permutations.
//! * [`divergence`]: KL divergence rates, total variation and Frobenius geometry.
//! * [`projection`]: the permutation projection, its mixtures and alternating projections.
//! * [`spectral`]: spectra, fundamental matrices, asymptotic variances and mixing times.
//! * [`landscape`]: Metropolis-Hastings kernels on energy landscapes and critical heights.
//! * [`tuning`]: choosing involutions, either exactly, by local search or adaptively.
//! * [`spin`]: trajectory-level samplers on Ising, Edwards-Anderson and Blume-Capel chains.
//! * [`io`]: plain-text matrix and permutation formats.

pub mod chain;
pub mod divergence;
mod error;
pub mod io;
pub mod landscape;
pub mod projection;
pub mod rng;
pub mod spectral;
pub mod spin;
pub mod tuning;

pub use error::{Error, ErrorKind, Result};
