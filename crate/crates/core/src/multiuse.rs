//! Multi-use sessions: expectation aggregation, fairness, usage significance,
//! usage-pattern prediction, and the composed multi-use trust score.
//!
//! When a consumer will use a service for several things at once, their
//! per-usage expectation vectors must be collapsed into one. Three strategies
//! are provided: plain averaging, a minimax "closeness" search that picks the
//! point whose worst-case and best-case distances to the expectations are as
//! balanced as possible, and a duration-weighted variant of the same search.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{IndicatorVector, ServiceProfile, UsagePattern, UsageProfile};
use crate::error::{Error, Result};
use crate::models::{predict_usage_expectations, TrainedModelPair};
use crate::trust::{adaptive_trust, TrustScore};

/// Search grid for the closeness optimizers: 101 points from 0.00 to 1.00.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lo: 0.0,
            hi: 1.0,
            step: 0.01,
        }
    }
}

impl GridSpec {
    pub fn point_count(&self) -> usize {
        ((self.hi - self.lo) / self.step).round() as usize + 1
    }

    pub fn point(&self, i: usize) -> f64 {
        // Dividing by the inverse step keeps points like 0.35 exactly at the
        // nearest representable value instead of accumulating 0.01 error.
        let scale = (1.0 / self.step).round();
        (self.lo * scale + i as f64) / scale
    }
}

/// An aggregated expectation vector with the per-indicator optimal range the
/// optimizer found and the fairness of the aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationResult {
    pub vector: IndicatorVector,
    pub per_indicator_optimal_range: Vec<[f64; 2]>,
    pub fairness: f64,
}

/// Aggregation strategy selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMethod {
    Average,
    Closeness,
    Weighted,
}

impl std::str::FromStr for AggregationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "avg" => Ok(AggregationMethod::Average),
            "closeness" => Ok(AggregationMethod::Closeness),
            "weighted" => Ok(AggregationMethod::Weighted),
            other => Err(Error::ConfigInvalid(format!(
                "unknown aggregation method {other:?} (expected avg, closeness, or weighted)"
            ))),
        }
    }
}

fn check_expectations(expectations: &[IndicatorVector]) -> Result<usize> {
    let first = expectations
        .first()
        .ok_or_else(|| Error::EmptyInput("no expectation vectors".into()))?;
    for e in expectations {
        if e.len() != first.len() {
            return Err(Error::DimensionMismatch(format!(
                "expectation vectors of length {} and {}",
                first.len(),
                e.len()
            )));
        }
    }
    Ok(first.len())
}

/// Fairness of an aggregate: the ratio of its nearest to its farthest
/// expectation vector in Euclidean distance. 1 means all consumers are
/// treated equally; defined as 1 when every vector coincides with the
/// aggregate.
pub fn fairness(agg: &IndicatorVector, expectations: &[IndicatorVector]) -> Result<f64> {
    let k = check_expectations(expectations)?;
    if agg.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "aggregate of length {} against expectations of length {k}",
            agg.len()
        )));
    }
    let mut min = f64::INFINITY;
    let mut max = 0.0f64;
    for e in expectations {
        let d: f64 = agg
            .values()
            .iter()
            .zip(e.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        min = min.min(d);
        max = max.max(d);
    }
    Ok(if max == 0.0 { 1.0 } else { min / max })
}

/// Componentwise arithmetic mean of the expectation vectors.
pub fn aggregate_average(expectations: &[IndicatorVector]) -> Result<AggregationResult> {
    let k = check_expectations(expectations)?;
    let n = expectations.len() as f64;
    let mut mean = vec![0.0; k];
    for e in expectations {
        for (m, v) in mean.iter_mut().zip(e.values()) {
            *m += v / n;
        }
    }
    let vector = IndicatorVector(mean);
    let per_indicator_optimal_range = vector.values().iter().map(|&m| [m, m]).collect();
    let fairness = fairness(&vector, expectations)?;
    Ok(AggregationResult {
        vector,
        per_indicator_optimal_range,
        fairness,
    })
}

/// Midpoint of a range, rounded half up on the two-decimal grid.
fn range_midpoint(lo: f64, hi: f64) -> f64 {
    let mid = (lo + hi) / 2.0;
    (mid * 100.0 + 0.5).floor() / 100.0
}

/// One-dimensional minimax search: over the grid, find the points where the
/// spread between the farthest and the nearest (weighted) expectation is
/// smallest. Returns (range, minimal spread).
fn closeness_search_1d(values: &[f64], weights: &[f64], grid: &GridSpec) -> ([f64; 2], f64) {
    let spread_at = |p: f64| -> f64 {
        let mut g = 0.0f64;
        let mut h = f64::INFINITY;
        for (x, w) in values.iter().zip(weights) {
            let d = w * (p - x).abs();
            g = g.max(d);
            h = h.min(d);
        }
        g - h
    };
    let mut best = f64::INFINITY;
    let spreads: Vec<f64> = (0..grid.point_count())
        .map(|i| {
            let s = spread_at(grid.point(i));
            best = best.min(s);
            s
        })
        .collect();
    let mut lo = f64::NAN;
    let mut hi = f64::NAN;
    for (i, s) in spreads.iter().enumerate() {
        if *s <= best + 1e-9 {
            if lo.is_nan() {
                lo = grid.point(i);
            }
            hi = grid.point(i);
        }
    }
    ([lo, hi], best)
}

fn aggregate_minimax(
    expectations: &[IndicatorVector],
    weights: &[f64],
    grid: &GridSpec,
) -> Result<AggregationResult> {
    let k = check_expectations(expectations)?;
    // A single expectation makes the spread identically zero everywhere; the
    // only sensible aggregate of one vector is the vector itself.
    if expectations.len() == 1 {
        let vector = expectations[0].clone();
        let per_indicator_optimal_range = vector.values().iter().map(|&v| [v, v]).collect();
        return Ok(AggregationResult {
            vector,
            per_indicator_optimal_range,
            fairness: 1.0,
        });
    }
    let mut components = Vec::with_capacity(k);
    let mut ranges = Vec::with_capacity(k);
    for indicator in 0..k {
        let values: Vec<f64> = expectations.iter().map(|e| e.values()[indicator]).collect();
        // Unanimous expectations make every distance curve proportional, so
        // the whole grid minimizes the spread; the consensus value is the
        // only aggregate that represents the consumers there.
        if values.iter().all(|v| *v == values[0]) {
            components.push(values[0]);
            ranges.push([values[0], values[0]]);
            continue;
        }
        let (range, _) = closeness_search_1d(&values, weights, grid);
        components.push(range_midpoint(range[0], range[1]));
        ranges.push(range);
    }
    let vector = IndicatorVector(components);
    let fairness = fairness(&vector, expectations)?;
    Ok(AggregationResult {
        vector,
        per_indicator_optimal_range: ranges,
        fairness,
    })
}

/// Per-indicator minimax aggregation with all usages weighted equally.
pub fn aggregate_closeness(
    expectations: &[IndicatorVector],
    grid: &GridSpec,
) -> Result<AggregationResult> {
    aggregate_minimax(expectations, &vec![1.0; expectations.len()], grid)
}

/// Minimax aggregation with distances scaled by usage significance.
pub fn aggregate_closeness_weighted(
    expectations: &[IndicatorVector],
    significances: &[f64],
    grid: &GridSpec,
) -> Result<AggregationResult> {
    if significances.len() != expectations.len() {
        return Err(Error::LengthMismatch(format!(
            "{} significances for {} expectation vectors",
            significances.len(),
            expectations.len()
        )));
    }
    aggregate_minimax(expectations, significances, grid)
}

/// Significance of each usage as its share of total session duration.
pub fn usage_significance(durations: &[f64]) -> Result<Vec<f64>> {
    if durations.is_empty() {
        return Err(Error::EmptyInput("no durations".into()));
    }
    if durations.iter().any(|d| *d < 0.0 || !d.is_finite()) {
        return Err(Error::OutOfRange("durations must be finite and ≥ 0".into()));
    }
    let total: f64 = durations.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroTotalDuration);
    }
    Ok(durations.iter().map(|d| d / total).collect())
}

/// One recorded use of a service, for pattern prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageEvent {
    pub timestamp_secs: i64,
    pub usage_id: String,
}

/// The prediction context: current hour of day and the most recent usage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternContext {
    pub hour_bucket: u8,
    pub last_usage: String,
}

fn hour_bucket_of(timestamp_secs: i64) -> u8 {
    (timestamp_secs.div_euclid(3600).rem_euclid(24)) as u8
}

/// Predicts the next usage pattern as the top-n usages by frequency
/// conditioned on (hour bucket, previous usage), backing off to unconditional
/// frequency when the context was never observed. Ties break lexicographically.
pub fn predict_usage_pattern(
    history: &[UsageEvent],
    context: &PatternContext,
    n: usize,
) -> Result<UsagePattern> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    if n == 0 {
        return Err(Error::ConfigInvalid("pattern size must be positive".into()));
    }
    let mut conditional: BTreeMap<&str, usize> = BTreeMap::new();
    for pair in history.windows(2) {
        if pair[0].usage_id == context.last_usage
            && hour_bucket_of(pair[1].timestamp_secs) == context.hour_bucket
        {
            *conditional.entry(pair[1].usage_id.as_str()).or_default() += 1;
        }
    }
    let counts = if conditional.is_empty() {
        let mut unconditional: BTreeMap<&str, usize> = BTreeMap::new();
        for event in history {
            *unconditional.entry(event.usage_id.as_str()).or_default() += 1;
        }
        unconditional
    } else {
        conditional
    };
    // BTreeMap iteration is already lexicographic, so a stable sort by count
    // keeps the lexicographic order among ties.
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1));
    let usages = ranked
        .into_iter()
        .take(n)
        .map(|(id, _)| id.to_string())
        .collect();
    UsagePattern::new(usages, None)
}

/// Scores a service for a whole usage pattern: predict each usage's
/// expectations, aggregate them with the chosen method, and apply the
/// adaptive-trust formula against the service's predicted indicators.
pub fn multi_use_trust(
    pair: &TrainedModelPair,
    service: &ServiceProfile,
    usage_pool: &[UsageProfile],
    pattern: &UsagePattern,
    method: AggregationMethod,
) -> Result<TrustScore> {
    let mut expectations = Vec::with_capacity(pattern.usages.len());
    for id in &pattern.usages {
        let usage = usage_pool
            .iter()
            .find(|u| &u.id == id)
            .ok_or_else(|| Error::InvalidDataset(format!("pattern names unknown usage {id}")))?;
        expectations.push(predict_usage_expectations(pair, usage)?);
    }
    let grid = GridSpec::default();
    let aggregate = match method {
        AggregationMethod::Average => aggregate_average(&expectations)?,
        AggregationMethod::Closeness => aggregate_closeness(&expectations, &grid)?,
        AggregationMethod::Weighted => {
            let significances = pattern.significances.as_ref().ok_or_else(|| {
                Error::ConfigInvalid("weighted aggregation requires durations".into())
            })?;
            aggregate_closeness_weighted(&expectations, significances, &grid)?
        }
    };
    let f_s = crate::models::predict_service_indicators(pair, service)?;
    TrustScore::from_value(adaptive_trust(&f_s, &aggregate.vector)?)
}
