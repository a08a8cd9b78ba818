//! Uncertainty-aware evaluation of quality-score samples.
//!
//! Stochastic scores (MC-dropout passes or ensemble members, optionally per
//! reference) become Gaussian predictive distributions that are
//! post-calibrated, scored with PPS/UPS/NLL/ECE/sharpness, and used to rank
//! segments by the risk of falling below a quality threshold.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregation;
pub mod baseline;
pub mod calibration;
pub mod distribution;
pub mod error;
pub mod ingestion;
pub mod metrics;
pub mod nonparametric;
pub mod numeric;
pub mod pipeline;
pub mod report;
pub mod retrieval;
pub mod simulator;
mod special;
pub mod types;

pub use error::{Error, Result};
pub use ingestion::{Dataset, DatasetMetadata, FoldPlan};
pub use types::{
    CalibrationParams, ConfidenceInterval, EvalReport, Gold, QualityGaussian, RetrievalReport,
    SampleMatrix, SegmentRecord, Strategy,
};

pub use special::{erf, erfc, std_normal_cdf, std_normal_pdf};
