//! Simulation, perfect sampling and spectral/entropy analysis for
//! probabilistic cellular automata built from a deterministic rule and
//! per-site noise.

pub mod cftp;
pub mod cli;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod fourier;
pub mod invariant;
pub mod lattice;
pub mod noise;
pub mod rules;

pub use error::{PcaError, Result};
pub use lattice::{Alphabet, Configuration, Geometry, SiteSet, WindowMeasure};
pub use noise::{NoiseKernel, PcaRule};
pub use rules::{LocalRule, Neighborhood};
