//! Classical changepoint detectors used as comparison points.

pub mod bocpd;
pub mod pelt;

pub use bocpd::{bocpd, bocpd_run, estimate_noise_std, BocpdConfig, BocpdModel, BocpdOutput, RunLengthTrace};
pub use pelt::{optimal_partitioning, pelt, pelt_segment, PeltConfig, PeltCost, Penalty, Segmentation};
