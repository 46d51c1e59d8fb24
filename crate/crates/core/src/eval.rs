//! Evaluation harness: train/test split, 10-level classification metrics,
//! and end-to-end pipeline scoring.
//!
//! Trust values are discretized to levels 1..=10 and treated as classes; the
//! report carries per-level precision, recall, F1 and accuracy plus their
//! macro averages over the levels that actually occur in the ground truth.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, UsagePattern};
use crate::error::{Error, Result};
use crate::indicators::{detect_indicator_count, DEFAULT_EPSILON};
use crate::models::{
    build_metadata_vocabulary, derive_service_indicator_labels, derive_usage_expectation_labels,
    train_service_model, train_usage_model, TrainedModelPair,
};
use crate::multiuse::{multi_use_trust, usage_significance, AggregationMethod};
use crate::nnet::TrainConfig;
use crate::synth::MultiUseRecord;
use crate::trust::{assess, trust_level};

pub const REPORT_FORMAT_VERSION: u32 = 1;
const LEVELS: usize = 10;

/// Classification metrics for one trust level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub actual: usize,
    pub detected: usize,
    pub correct: usize,
}

/// Full evaluation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub version: u32,
    /// One entry per trust level 1..=10.
    pub levels: Vec<LevelMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub macro_accuracy: f64,
    /// Rows are true levels, columns predicted levels.
    pub confusion: Vec<Vec<usize>>,
    pub sample_count: usize,
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "level  precision  recall     f1   accuracy  actual")?;
        for (i, m) in self.levels.iter().enumerate() {
            writeln!(
                f,
                "{:>5}  {:>9.3}  {:>6.3}  {:>5.3}  {:>8.3}  {:>6}",
                i + 1,
                m.precision,
                m.recall,
                m.f1,
                m.accuracy,
                m.actual
            )?;
        }
        writeln!(
            f,
            "macro  {:>9.3}  {:>6.3}  {:>5.3}  {:>8.3}  {:>6}",
            self.macro_precision,
            self.macro_recall,
            self.macro_f1,
            self.macro_accuracy,
            self.sample_count
        )
    }
}

/// Seeded shuffle of the rating records, then a ratio split. Services,
/// usages, and schema are shared by both halves.
pub fn split_dataset(dataset: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::ConfigInvalid(format!(
            "split ratio {ratio} must be strictly between 0 and 1"
        )));
    }
    if dataset.ratings.len() < 2 {
        return Err(Error::TooFewRecords(format!(
            "{} rating records, need at least 2 to split",
            dataset.ratings.len()
        )));
    }
    let mut records = dataset.ratings.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    records.shuffle(&mut rng);
    let cut = ((records.len() as f64 * ratio).floor() as usize).clamp(1, records.len() - 1);
    let test = records.split_off(cut);
    let mut train_set = dataset.clone();
    train_set.ratings = records;
    let mut test_set = dataset.clone();
    test_set.ratings = test;
    Ok((train_set, test_set))
}

/// Per-level and macro metrics for predicted vs. true trust levels.
pub fn metrics(predicted: &[u8], actual: &[u8]) -> Result<EvaluationReport> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch(format!(
            "{} predictions for {} true levels",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::EmptyInput("no samples to score".into()));
    }
    for level in predicted.iter().chain(actual) {
        if !(1..=LEVELS as u8).contains(level) {
            return Err(Error::OutOfRange(format!("trust level {level}")));
        }
    }

    let mut confusion = vec![vec![0usize; LEVELS]; LEVELS];
    for (p, t) in predicted.iter().zip(actual) {
        confusion[usize::from(t - 1)][usize::from(p - 1)] += 1;
    }
    let n = predicted.len();

    let mut levels = Vec::with_capacity(LEVELS);
    let mut sums = (0.0, 0.0, 0.0, 0.0);
    let mut present = 0usize;
    for l in 0..LEVELS {
        let correct = confusion[l][l];
        let actual_l: usize = confusion[l].iter().sum();
        let detected_l: usize = confusion.iter().map(|row| row[l]).sum();
        let precision = if detected_l > 0 {
            correct as f64 / detected_l as f64
        } else {
            0.0
        };
        let recall = if actual_l > 0 {
            correct as f64 / actual_l as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        // True negatives: samples where level l appears in neither role.
        let true_negative = (n + correct) - actual_l - detected_l;
        let accuracy = (correct + true_negative) as f64 / n as f64;
        if actual_l > 0 {
            present += 1;
            sums.0 += precision;
            sums.1 += recall;
            sums.2 += f1;
            sums.3 += accuracy;
        }
        levels.push(LevelMetrics {
            precision,
            recall,
            f1,
            accuracy,
            actual: actual_l,
            detected: detected_l,
            correct,
        });
    }
    let present = present as f64;
    Ok(EvaluationReport {
        version: REPORT_FORMAT_VERSION,
        levels,
        macro_precision: sums.0 / present,
        macro_recall: sums.1 / present,
        macro_f1: sums.2 / present,
        macro_accuracy: sums.3 / present,
        confusion,
        sample_count: n,
    })
}

/// End-to-end pipeline settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub epsilon: f64,
    pub split_ratio: f64,
    pub split_seed: u64,
    pub hidden: usize,
    pub service_train: TrainConfig,
    pub usage_train: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            epsilon: DEFAULT_EPSILON,
            split_ratio: 0.8,
            split_seed: 42,
            hidden: 32,
            service_train: TrainConfig {
                learning_rate: 1.0,
                epochs: 4000,
                batch_size: usize::MAX,
                seed: 42,
            },
            usage_train: TrainConfig {
                learning_rate: 2.0,
                epochs: 6000,
                batch_size: usize::MAX,
                seed: 43,
            },
        }
    }
}

/// Detects indicators on a training set, derives labels, and trains both
/// models.
pub fn train_pipeline(train: &Dataset, config: &PipelineConfig) -> Result<TrainedModelPair> {
    let (indicator_count, partition) = detect_indicator_count(train, config.epsilon)?;
    let service_model = train_service_model(
        train,
        &partition,
        &train.schema,
        config.hidden,
        &config.service_train,
    )?;
    let service_labels = derive_service_indicator_labels(train, &partition);
    let usage_labels = derive_usage_expectation_labels(train, &service_labels)?;
    let vocabulary = build_metadata_vocabulary(&train.usages)?;
    let usage_model = train_usage_model(
        train,
        &usage_labels,
        &vocabulary,
        config.hidden,
        &config.usage_train,
    )?;
    Ok(TrainedModelPair {
        service_model,
        usage_model,
        schema: train.schema.clone(),
        vocabulary,
        indicator_count,
    })
}

/// Splits the dataset, trains on the larger part, and scores every held-out
/// rating record as a 10-level classification problem.
pub fn evaluate_pipeline(dataset: &Dataset, config: &PipelineConfig) -> Result<EvaluationReport> {
    let (train, test) = split_dataset(dataset, config.split_ratio, config.split_seed)?;
    let pair = train_pipeline(&train, config)?;
    let mut predicted = Vec::with_capacity(test.ratings.len());
    let mut actual = Vec::with_capacity(test.ratings.len());
    for record in &test.ratings {
        let service = test
            .service(&record.service_id)
            .ok_or_else(|| Error::InvalidDataset(format!("unknown service {}", record.service_id)))?;
        let usage = test
            .usage(&record.usage_id)
            .ok_or_else(|| Error::InvalidDataset(format!("unknown usage {}", record.usage_id)))?;
        predicted.push(assess(&pair, service, usage)?.level);
        actual.push(trust_level(f64::from(record.rating) / 10.0)?);
    }
    metrics(&predicted, &actual)
}

/// Like [`evaluate_pipeline`], but the held-out items are multi-use session
/// records scored through the chosen aggregation. The single-use ratings are
/// split with the same discipline and only the training part is used.
pub fn evaluate_multiuse(
    dataset: &Dataset,
    sessions: &[MultiUseRecord],
    method: AggregationMethod,
    config: &PipelineConfig,
) -> Result<EvaluationReport> {
    if sessions.is_empty() {
        return Err(Error::EmptyInput("no multi-use session records".into()));
    }
    let (train, _) = split_dataset(dataset, config.split_ratio, config.split_seed)?;
    let pair = train_pipeline(&train, config)?;
    let mut predicted = Vec::with_capacity(sessions.len());
    let mut actual = Vec::with_capacity(sessions.len());
    for session in sessions {
        let service = dataset
            .service(&session.service_id)
            .ok_or_else(|| Error::InvalidDataset(format!("unknown service {}", session.service_id)))?;
        let significances = usage_significance(&session.durations)?;
        let pattern = UsagePattern::new(session.usage_ids.clone(), Some(significances))?;
        let score = multi_use_trust(&pair, service, &dataset.usages, &pattern, method)?;
        predicted.push(score.level);
        actual.push(trust_level(f64::from(session.rating) / 10.0)?);
    }
    metrics(&predicted, &actual)
}
