//! Oscillator phase-noise models, discrete-time generators, error analysis
//! of the sampled channel, and an oversampled link simulator.

pub mod analysis;
pub mod error;
pub mod fitting;
pub mod linksim;
pub mod points;
pub mod psd_models;
pub mod quadrature;
pub mod spectral;
pub mod timegen;

pub use error::{Error, Result};
pub use psd_models::{CompositeModel, OscillatorParams, PhasorPsdValue, ThreeGppParams};
