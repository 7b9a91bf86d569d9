//! Soft-information matching decoding for the Surface-13 bit-flip code.
//!
//! The crate is organised along the pipeline:
//!
//! - [`readout`]: fit IQ readout models and classify samples.
//! - [`code`]: the Surface-13 layout, detectors, and decoding graphs
//!   (circuit-level noise floor and pairwise-correlation estimates).
//! - [`sim`]: synthetic shot datasets with analog readout and leakage.
//! - [`decode`]: hard and soft minimum-weight perfect matching.
//! - [`analysis`]: logical fidelity, decay fits, post-selection, reports.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod numeric;
pub mod pipeline;
pub mod readout;
pub mod rng;

pub mod analysis;
pub mod code;
pub mod decode;
pub mod sim;

pub use error::{Error, Result};

use sha2::{Digest, Sha256};

/// Hex SHA-256 of a canonical configuration serialization.
pub fn config_hash_of(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
