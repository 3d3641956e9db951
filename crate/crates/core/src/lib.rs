//! Agent-based simulator of competing innovations diffusing over
//! small-world networks, driven by an M-option Potts decision rule.
//!
//! The pipeline for one run is:
//! [`network`] builds a Moore lattice and rewires it, [`scenarios`] assigns
//! utilities and innovator schedules, [`simulation`] advances the
//! population tick by tick with the [`decision`] kernel, and [`output`]
//! serializes the result. [`config`] and [`cli`] expose the same surface
//! as text files and a command line.

pub mod cli;
pub mod config;
pub mod decision;
pub mod error;
pub mod network;
pub mod output;
pub mod rng;
pub mod scenarios;
pub mod simulation;

pub use error::{Error, Result};
