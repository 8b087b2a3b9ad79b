//! Data-driven predictive control of radiant sheet heating.
//!
//! The crate chains four stages:
//!
//! * [`thermal`] simulates a sheet heated by a 5 × 3 radiant heater bank;
//! * [`narx`] identifies a wavelet-network NARX model from input/output data
//!   and linearizes it around any operating point;
//! * [`mpc`] wraps the linearized model in a constrained receding-horizon
//!   controller;
//! * [`experiments`] drives identification runs, closed-loop evaluation and
//!   parameter sweeps.
//!
//! [`io`] holds the file formats and key=value configuration parser shared
//! by the `thermoform` command-line tool.

pub mod error;
pub mod experiments;
pub mod io;
pub mod mpc;
pub mod narx;
pub mod thermal;

pub use error::{Error, Result};

/// Offset between Celsius and Kelvin.
pub const KELVIN_OFFSET: f64 = 273.15;

pub fn celsius_to_kelvin(c: f64) -> f64 {
    c + KELVIN_OFFSET
}

pub fn kelvin_to_celsius(k: f64) -> f64 {
    k - KELVIN_OFFSET
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/plant.md")]
    mod plant {}
    #[doc = include_str!("../../../book/src/identification.md")]
    mod identification {}
    #[doc = include_str!("../../../book/src/control.md")]
    mod control {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
