//! Unsupervised breakpoint detection in time series.
//!
//! A series is cut into overlapping windows, each window is encoded by a
//! greedily trained stack of tied-weight autoencoders, and peaks in the
//! normalised distance between consecutive encodings become breakpoints.
//! PELT and BOCPD are included as baselines, together with the evaluation
//! metrics and a seeded synthetic generator.

pub mod autoencoder;
pub mod baselines;
pub mod cli;
pub mod detector;
pub mod error;
pub mod metrics;
pub mod series;
pub mod synthgen;
pub mod windowing;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use error::{Error, Result};
pub use series::{DetectionResult, LabelSet, TimeSeries};

/// First 16 hex digits of the SHA-256 of a value's JSON form.
pub fn config_digest<T: Serialize + ?Sized>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config types serialize infallibly");
    Sha256::digest(&json)
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}
