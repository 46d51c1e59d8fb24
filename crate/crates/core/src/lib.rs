//! Usage-adaptive trust assessment for crowdsourced IoT services.
//!
//! A crowdsourced IoT service (a WiFi hotspot, shared compute, energy
//! transfer) is rated differently depending on *how* it is used. This crate
//! infers the latent *trust indicators* behind those ratings, trains a
//! service-to-indicator and a usage-to-indicator model, and combines them
//! into a trust value that adapts to a consumer's usage pattern.
//!
//! Pipeline overview:
//!
//! 1. [`indicators`] detects the number of trust indicators from rating
//!    anomalies and cross-service rating correlations.
//! 2. [`models`] derives per-indicator training labels, encodes service
//!    attributes and usage metadata, and trains both neural models.
//! 3. [`trust`] evaluates the adaptive trust of a service for one usage.
//! 4. [`multiuse`] aggregates the expectations of a multi-usage session
//!    (average, minimax closeness, significance-weighted closeness) before
//!    scoring.
//! 5. [`synth`] generates synthetic marketplaces with known ground truth and
//!    handles all file I/O; [`eval`] reproduces the train/test evaluation
//!    methodology.

pub mod cli;
pub mod domain;
pub mod error;
pub mod eval;
pub mod indicators;
pub mod models;
pub mod multiuse;
pub mod nnet;
pub mod synth;
pub mod trust;

pub use domain::{
    AttributeValue, Dataset, IndicatorVector, RatingRecord, ServiceProfile, UsagePattern,
    UsageProfile,
};
pub use error::{Error, Result};
