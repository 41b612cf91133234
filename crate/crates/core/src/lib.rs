//! Simulation engine for binaural tone-in-noise detection.
//!
//! The model predicts masked thresholds for a 500-Hz tone in narrowband
//! noise maskers whose interaural relation is varied (delayed, decorrelated,
//! or interaurally uncorrelated). Detection is driven entirely by
//! fluctuations of the interaural phase difference (IPD) at the output of a
//! minimal auditory periphery:
//!
//! 1. [`stimgen`] renders band-limited Gaussian noise plus an optional tone,
//! 2. [`periphery`] applies gammatone filtering, haircell compression, and a
//!    temporal fine structure filter per ear,
//! 3. [`binaural`] turns the two complex outputs into an IPD trace, adds
//!    internal phase noise, and collapses each interval to one decision
//!    variable,
//! 4. [`observer`] runs adaptive three-interval forced-choice tracks,
//! 5. [`experiments`] reproduces the published simulation studies, and
//! 6. [`coherence`] provides the analytical coherence tooling used to
//!    interpret the model.

pub mod binaural;
pub mod coherence;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod observer;
pub mod periphery;
pub mod seeds;
pub mod signal;
pub mod stimgen;

pub use error::{Error, Result};
