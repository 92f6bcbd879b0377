//! Quantized-feedback beamforming for parallel amplify-and-forward relay networks.
//!
//! The crate is split along the lines of the workflow it supports:
//!
//! * [`model`] holds the network model: configuration, channel sampling, the
//!   received-SNR expression and the SNR-maximizing encoder.
//! * [`codebook`] builds quantizer codebooks: single-relay selection, explicit
//!   lists, unitary transforms and the constrained continuous families.
//! * [`structure`] analyzes finite codebooks combinatorially (index-set
//!   collections, diversity caps, OMRS/SRS membership).
//! * [`montecarlo`] estimates symbol error rate curves and diversity slopes.
//! * [`oracles`] evaluates closed-form reference quantities and audits them
//!   against independent sampling.
//!
//! Power is kept in linear scale everywhere except at I/O boundaries, and all
//! random draws come from counter-addressed streams so that results never
//! depend on the number of worker threads.

// `!(x > y)` is used on purpose so that NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codebook;
pub mod curve;
mod error;
pub mod model;
pub mod montecarlo;
pub mod oracles;
pub mod rng;
pub mod serde_complex;
pub mod structure;

pub use error::{Error, Result};
