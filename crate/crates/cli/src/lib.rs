//! Command-line front end for the binaural detection model: parses strict
//! `key = value` run configurations and executes the packaged experiments,
//! writing deterministic CSV, plot, and WAV artifacts.

pub mod config;
pub mod runner;
