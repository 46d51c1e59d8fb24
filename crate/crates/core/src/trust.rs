//! Adaptive trust computation and trust-level discretization.
//!
//! A service's trust is relative to what the consumer expects: the score is
//! the expectation-weighted satisfaction ratio Σ min(f_s, f_u) / Σ f_u, which
//! saturates at 1 exactly when the service meets or exceeds every expectation.

use serde::{Deserialize, Serialize};

use crate::domain::{IndicatorVector, ServiceProfile, UsageProfile};
use crate::error::{Error, Result};
use crate::models::{predict_service_indicators, predict_usage_expectations, TrainedModelPair};

/// A trust value with its discretized 1..10 level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustScore {
    pub value: f64,
    pub level: u8,
}

impl TrustScore {
    pub fn from_value(value: f64) -> Result<Self> {
        Ok(TrustScore {
            value,
            level: trust_level(value)?,
        })
    }
}

/// Usage-adaptive trust of a service: Σ min(f_s, f_u) / Σ f_u.
pub fn adaptive_trust(f_s: &IndicatorVector, f_u: &IndicatorVector) -> Result<f64> {
    if f_s.len() != f_u.len() {
        return Err(Error::DimensionMismatch(format!(
            "service vector has {} components, usage vector {}",
            f_s.len(),
            f_u.len()
        )));
    }
    let denominator: f64 = f_u.values().iter().sum();
    if denominator <= 0.0 {
        return Err(Error::ZeroExpectation);
    }
    let numerator: f64 = f_s
        .values()
        .iter()
        .zip(f_u.values())
        .map(|(s, u)| s.min(*u))
        .sum();
    Ok(numerator / denominator)
}

/// Maps a trust value in [0,1] onto ten equal levels over (0,1]; 0 maps to
/// level 1. The small slack absorbs representation error in values that are
/// exact multiples of 0.1 up to rounding.
pub fn trust_level(value: f64) -> Result<u8> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::OutOfRange(format!("trust value {value}")));
    }
    let level = (10.0 * value - 1e-9).ceil().max(1.0);
    Ok(level as u8)
}

/// Predicts both indicator vectors and scores the service for the usage.
pub fn assess(
    pair: &TrainedModelPair,
    service: &ServiceProfile,
    usage: &UsageProfile,
) -> Result<TrustScore> {
    let f_s = predict_service_indicators(pair, service)?;
    let f_u = predict_usage_expectations(pair, usage)?;
    TrustScore::from_value(adaptive_trust(&f_s, &f_u)?)
}
