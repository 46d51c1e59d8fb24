//! Service-to-indicator and usage-to-indicator models.
//!
//! Rating data carries only scalar ratings, so per-indicator supervision has
//! to be derived: service labels are block-mean ratings over the detected
//! usage partition, and usage expectation labels are fitted by inverting the
//! adaptive-trust formula on the two-decimal grid. Model outputs are snapped
//! to the same grid; trust values are two-decimal quantities throughout.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{
    AttributeKind, AttributeSchema, AttributeValue, Dataset, IndicatorVector, ServiceProfile,
    UsageProfile,
};
use crate::error::{Error, Result};
use crate::indicators::IndicatorPartition;
use crate::nnet::{Network, TrainConfig, TrainSample};

/// Sorted vector of all metadata words in a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataVocabulary {
    pub words: Vec<String>,
}

impl MetadataVocabulary {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Binary encoding of a usage's metadata over the vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorVector {
    pub bits: Vec<u8>,
}

impl DescriptorVector {
    pub fn as_input(&self) -> Vec<f64> {
        self.bits.iter().map(|b| f64::from(*b)).collect()
    }
}

/// Per-service training labels with a mask for indicators the service was
/// never rated on.
pub type ServiceLabels = BTreeMap<String, (Vec<f64>, Vec<bool>)>;

/// The two trained networks plus everything needed to encode their inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModelPair {
    pub service_model: Network,
    pub usage_model: Network,
    pub schema: AttributeSchema,
    pub vocabulary: MetadataVocabulary,
    pub indicator_count: usize,
}

/// Union of all metadata words across usages, sorted lexicographically.
pub fn build_metadata_vocabulary(usages: &[UsageProfile]) -> Result<MetadataVocabulary> {
    if usages.is_empty() {
        return Err(Error::EmptyInput("no usages".into()));
    }
    let mut words: Vec<String> = usages
        .iter()
        .flat_map(|u| u.metadata.iter().cloned())
        .collect();
    words.sort();
    words.dedup();
    Ok(MetadataVocabulary { words })
}

/// Descriptor bit k is 1 iff vocabulary word k belongs to the usage metadata.
pub fn encode_descriptor(
    usage: &UsageProfile,
    vocabulary: &MetadataVocabulary,
) -> Result<DescriptorVector> {
    for word in &usage.metadata {
        if vocabulary.words.binary_search(word).is_err() {
            return Err(Error::UnknownMetadataWord(word.clone()));
        }
    }
    let bits = vocabulary
        .words
        .iter()
        .map(|w| u8::from(usage.metadata.contains(w)))
        .collect();
    Ok(DescriptorVector { bits })
}

/// One-hot categorical attributes and min-max scaled numeric attributes,
/// concatenated in schema order.
pub fn encode_service_attributes(
    service: &ServiceProfile,
    schema: &AttributeSchema,
) -> Result<Vec<f64>> {
    let mut encoded = Vec::with_capacity(schema.encoded_width());
    for decl in &schema.attributes {
        let value = service.attributes.get(&decl.name).ok_or_else(|| {
            Error::SchemaViolation(format!(
                "service {} missing attribute {}",
                service.id, decl.name
            ))
        })?;
        match (&decl.kind, value) {
            (AttributeKind::Categorical { categories }, AttributeValue::Categorical(v)) => {
                let pos = categories.iter().position(|c| c == v).ok_or_else(|| {
                    Error::SchemaViolation(format!(
                        "category {v:?} not declared for {}",
                        decl.name
                    ))
                })?;
                encoded.extend((0..categories.len()).map(|i| f64::from(u8::from(i == pos))));
            }
            (AttributeKind::Numeric { min, max }, AttributeValue::Numeric(v)) => {
                if v < min || v > max {
                    return Err(Error::SchemaViolation(format!(
                        "{v} outside [{min}, {max}] for {}",
                        decl.name
                    )));
                }
                let span = max - min;
                encoded.push(if span > 0.0 { (v - min) / span } else { 0.0 });
            }
            _ => {
                return Err(Error::SchemaViolation(format!(
                    "value kind does not match schema for {}",
                    decl.name
                )))
            }
        }
    }
    Ok(encoded)
}

/// Service label at indicator k = mean normalized rating over records whose
/// usage falls in partition block k; the mask clears indicators the service
/// was never rated on.
pub fn derive_service_indicator_labels(
    dataset: &Dataset,
    partition: &IndicatorPartition,
) -> ServiceLabels {
    let k = partition.indicator_count();
    let mut sums: BTreeMap<String, (Vec<f64>, Vec<usize>)> = BTreeMap::new();
    for r in &dataset.ratings {
        let Some(block) = partition.block_of(&r.usage_id) else {
            continue;
        };
        let entry = sums
            .entry(r.service_id.clone())
            .or_insert_with(|| (vec![0.0; k], vec![0; k]));
        entry.0[block] += f64::from(r.rating) / 10.0;
        entry.1[block] += 1;
    }
    sums.into_iter()
        .map(|(service, (sum, counts))| {
            let labels: Vec<f64> = sum
                .iter()
                .zip(&counts)
                .map(|(s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
                .collect();
            let mask: Vec<bool> = counts.iter().map(|&n| n > 0).collect();
            (service, (labels, mask))
        })
        .collect()
}

/// Adaptive trust restricted to the unmasked components of a label vector.
fn masked_adaptive_trust(labels: &[f64], mask: &[bool], expectation: &[f64]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((l, m), x) in labels.iter().zip(mask).zip(expectation) {
        if *m {
            num += l.min(*x);
            den += x;
        }
    }
    (den > 0.0).then_some(num / den)
}

const GRID_POINTS: usize = 101;

fn grid_value(i: usize) -> f64 {
    i as f64 / 100.0
}

/// Fits one expectation vector per usage by inverting the adaptive-trust
/// formula on the 0.01 grid: coordinate descent over components, each sweep
/// exhaustively searching the grid, ties broken toward the smallest value.
pub fn derive_usage_expectation_labels(
    dataset: &Dataset,
    service_labels: &ServiceLabels,
) -> Result<BTreeMap<String, IndicatorVector>> {
    let k = service_labels
        .values()
        .next()
        .map(|(l, _)| l.len())
        .ok_or_else(|| Error::EmptyInput("no service labels".into()))?;

    // (labels, mask, normalized rating) per usage.
    let mut evidence: BTreeMap<String, Vec<(&Vec<f64>, &Vec<bool>, f64)>> = BTreeMap::new();
    for ((service_id, usage_id), rating) in dataset.mean_ratings() {
        if let Some((labels, mask)) = service_labels.get(&service_id) {
            evidence
                .entry(usage_id)
                .or_default()
                .push((labels, mask, rating));
        }
    }

    let mut fitted = BTreeMap::new();
    for usage in &dataset.usages {
        let Some(rows) = evidence.get(&usage.id) else {
            return Err(Error::UnratedUsage(usage.id.clone()));
        };
        let objective = |x: &[f64]| -> f64 {
            rows.iter()
                .map(|(labels, mask, rating)| {
                    match masked_adaptive_trust(labels, mask, x) {
                        Some(t) => (t - rating) * (t - rating),
                        // All-zero expectation is not admissible evidence.
                        None => f64::INFINITY,
                    }
                })
                .sum()
        };

        let mut x = vec![0.5; k];
        for _ in 0..50 {
            let mut changed = false;
            for component in 0..k {
                let mut best_value = x[component];
                let mut best_obj = f64::INFINITY;
                for i in 0..GRID_POINTS {
                    let candidate = grid_value(i);
                    let rest: f64 = x
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != component)
                        .map(|(_, v)| v)
                        .sum();
                    if candidate + rest == 0.0 {
                        continue;
                    }
                    let old = std::mem::replace(&mut x[component], candidate);
                    let obj = objective(&x);
                    x[component] = old;
                    if obj < best_obj - 1e-12 {
                        best_obj = obj;
                        best_value = candidate;
                    }
                }
                if best_value != x[component] {
                    x[component] = best_value;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        fitted.insert(usage.id.clone(), IndicatorVector(x));
    }
    Ok(fitted)
}

/// Trains the service-to-indicator network on derived masked labels.
pub fn train_service_model(
    dataset: &Dataset,
    partition: &IndicatorPartition,
    schema: &AttributeSchema,
    hidden: usize,
    config: &TrainConfig,
) -> Result<Network> {
    let labels = derive_service_indicator_labels(dataset, partition);
    let k = partition.indicator_count();
    let mut samples = Vec::new();
    for service in &dataset.services {
        let Some((targets, mask)) = labels.get(&service.id) else {
            continue;
        };
        if !mask.iter().any(|m| *m) {
            continue;
        }
        samples.push(TrainSample::new(
            encode_service_attributes(service, schema)?,
            targets.clone(),
            mask.clone(),
        ));
    }
    let mut net = Network::new(&[schema.encoded_width(), hidden, k], config.seed)?;
    net.train(&samples, config)?;
    Ok(net)
}

/// Trains the usage-to-indicator network on fitted expectation labels.
pub fn train_usage_model(
    dataset: &Dataset,
    usage_labels: &BTreeMap<String, IndicatorVector>,
    vocabulary: &MetadataVocabulary,
    hidden: usize,
    config: &TrainConfig,
) -> Result<Network> {
    if vocabulary.is_empty() {
        return Err(Error::EmptyInput("metadata vocabulary is empty".into()));
    }
    let k = usage_labels
        .values()
        .next()
        .map(IndicatorVector::len)
        .ok_or_else(|| Error::EmptyInput("no usage labels".into()))?;
    let mut samples = Vec::new();
    for usage in &dataset.usages {
        let Some(target) = usage_labels.get(&usage.id) else {
            continue;
        };
        samples.push(TrainSample::fully_labeled(
            encode_descriptor(usage, vocabulary)?.as_input(),
            target.values().to_vec(),
        ));
    }
    let mut net = Network::new(&[vocabulary.len(), hidden, k], config.seed)?;
    net.train(&samples, config)?;
    Ok(net)
}

/// Snaps a raw network output onto the two-decimal trust grid.
fn snap_to_grid(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 100.0).round() / 100.0
}

/// Predicts a service's trust value at each indicator.
pub fn predict_service_indicators(
    pair: &TrainedModelPair,
    service: &ServiceProfile,
) -> Result<IndicatorVector> {
    let input = encode_service_attributes(service, &pair.schema)?;
    let out = pair.service_model.forward(&input)?;
    Ok(IndicatorVector(out.into_iter().map(snap_to_grid).collect()))
}

/// Predicts a usage's expected trust at each indicator.
pub fn predict_usage_expectations(
    pair: &TrainedModelPair,
    usage: &UsageProfile,
) -> Result<IndicatorVector> {
    let input = encode_descriptor(usage, &pair.vocabulary)?.as_input();
    let out = pair.usage_model.forward(&input)?;
    Ok(IndicatorVector(out.into_iter().map(snap_to_grid).collect()))
}
