//! Metastability analysis for parameter-dependent semi-Markov families.
//!
//! The pipeline: [`model`] declares and validates a family and reduces it to
//! source-only transition times; [`hierarchy`] builds the cluster tree with
//! leading-order kernels, invariant measures and time scales; [`metastable`]
//! turns the tree into a time-scale lattice and metastable distributions;
//! [`montecarlo`] instantiates the family at a concrete `eps` and checks the
//! predictions by simulation and exact linear algebra.

#![allow(clippy::needless_range_loop)]

pub mod asymptotics;
pub mod chain;
pub mod generate;
pub mod hierarchy;
pub mod metastable;
pub mod model;
pub mod montecarlo;
pub mod presets;
pub mod report;
pub mod verify;
