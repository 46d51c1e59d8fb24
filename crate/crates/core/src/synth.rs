//! Synthetic marketplace generator and all file ingestion / persistence.
//!
//! The generator is the test oracle for the whole pipeline: it fabricates a
//! marketplace whose ratings are an exact function of known per-indicator
//! ground truth, so every downstream stage (indicator detection, label
//! derivation, model training, trust scoring) can be checked against what was
//! planted. Noise is a single Gaussian knob on top of the exact construction.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{
    AttributeDecl, AttributeKind, AttributeSchema, AttributeValue, Dataset, IndicatorVector,
    RatingRecord, ServiceProfile, UsageProfile,
};
use crate::error::{Error, Result};
use crate::models::{MetadataVocabulary, TrainedModelPair};
use crate::multiuse::{aggregate_closeness_weighted, usage_significance, GridSpec};
use crate::nnet::Network;
use crate::trust::adaptive_trust;

/// Knobs for the synthetic marketplace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub indicator_count: usize,
    pub num_services: usize,
    pub num_usages: usize,
    pub noise_std: f64,
    pub seed: u64,
    /// Number of three-usage session records with an overall rating.
    pub multi_use_items: usize,
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.indicator_count == 0 || self.indicator_count > 10 {
            return Err(Error::ConfigInvalid(
                "indicator count must be in 1..=10".into(),
            ));
        }
        if self.num_services == 0 {
            return Err(Error::ConfigInvalid("need at least one service".into()));
        }
        if self.num_usages < self.indicator_count {
            return Err(Error::ConfigInvalid(
                "need at least one usage per indicator".into(),
            ));
        }
        if self.noise_std < 0.0 || !self.noise_std.is_finite() {
            return Err(Error::ConfigInvalid("noise std must be finite and ≥ 0".into()));
        }
        Ok(())
    }
}

/// Everything the generator knows that the pipeline has to rediscover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub service_vectors: BTreeMap<String, IndicatorVector>,
    pub usage_expectations: BTreeMap<String, IndicatorVector>,
    pub usage_blocks: BTreeMap<String, usize>,
    pub usage_durations: BTreeMap<String, f64>,
}

/// A three-usage session with its overall rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiUseRecord {
    pub service_id: String,
    pub usage_ids: Vec<String>,
    pub durations: Vec<f64>,
    pub rating: u8,
}

fn clamp_rating(value: f64) -> u8 {
    (value * 10.0).round().clamp(1.0, 10.0) as u8
}

/// Draws `k` trust levels from 1..=10 that are pairwise at least two apart,
/// so the per-service rating gaps stay above the clustering threshold.
fn separated_levels(k: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    // Bijection: k distinct sorted picks from 1..=(11-k), shifted by index,
    // yield k sorted values with consecutive differences ≥ 2.
    let mut pool: Vec<u8> = (1..=(11 - k as u8)).collect();
    pool.shuffle(rng);
    let mut picks: Vec<u8> = pool.into_iter().take(k).collect();
    picks.sort_unstable();
    picks
        .into_iter()
        .enumerate()
        .map(|(i, v)| v + i as u8)
        .collect()
}

/// Fabricates a marketplace with known ground truth.
///
/// Usages are split evenly into `indicator_count` blocks; each usage expects
/// full trust on its own block's indicator and none elsewhere, and carries a
/// metadata word identifying the block. Each service gets one well-separated
/// trust level per indicator, mirrored into its numeric attributes. Every
/// (service, usage) pair is rated through the adaptive-trust formula plus
/// Gaussian noise, clamped to 1..=10.
pub fn generate_dataset(
    config: &GeneratorConfig,
) -> Result<(Dataset, GroundTruth, Vec<MultiUseRecord>)> {
    config.validate()?;
    let k = config.indicator_count;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.noise_std)
        .map_err(|e| Error::ConfigInvalid(format!("noise distribution: {e}")))?;

    let schema = AttributeSchema {
        attributes: (0..k)
            .map(|i| AttributeDecl {
                name: format!("q{i}"),
                kind: AttributeKind::Numeric { min: 0.0, max: 1.0 },
            })
            .chain(std::iter::once(AttributeDecl {
                name: "brand".into(),
                kind: AttributeKind::Categorical {
                    categories: vec!["X".into(), "Y".into(), "Z".into()],
                },
            }))
            .collect(),
    };

    let mut usages = Vec::with_capacity(config.num_usages);
    let mut usage_blocks = BTreeMap::new();
    let mut usage_expectations = BTreeMap::new();
    let mut usage_durations = BTreeMap::new();
    for i in 0..config.num_usages {
        let block = i % k;
        let id = format!("u{i:04}");
        let duration = rng.gen_range(5.0..60.0f64).round();
        let mut expectation = vec![0.0; k];
        expectation[block] = 1.0;
        usages.push(UsageProfile {
            id: id.clone(),
            metadata: std::iter::once(format!("blk{block}")).collect(),
            avg_duration_minutes: duration,
        });
        usage_blocks.insert(id.clone(), block);
        usage_expectations.insert(id.clone(), IndicatorVector(expectation));
        usage_durations.insert(id, duration);
    }

    let mut services = Vec::with_capacity(config.num_services);
    let mut service_vectors = BTreeMap::new();
    for i in 0..config.num_services {
        let id = format!("s{i:04}");
        let mut levels = separated_levels(k, &mut rng);
        levels.shuffle(&mut rng);
        let vector: Vec<f64> = levels.iter().map(|l| f64::from(*l) / 10.0).collect();
        let brand = ["X", "Y", "Z"][rng.gen_range(0..3)];
        let mut attributes: BTreeMap<String, AttributeValue> = vector
            .iter()
            .enumerate()
            .map(|(j, v)| (format!("q{j}"), AttributeValue::Numeric(*v)))
            .collect();
        attributes.insert("brand".into(), AttributeValue::Categorical(brand.into()));
        services.push(ServiceProfile {
            id: id.clone(),
            owner: format!("owner{i:04}"),
            device: "phone".into(),
            functions: vec!["wifi-hotspot".into()],
            qos: BTreeMap::new(),
            attributes,
        });
        service_vectors.insert(id, IndicatorVector(vector));
    }

    let mut ratings = Vec::with_capacity(config.num_services * config.num_usages);
    for service in &services {
        let f_s = &service_vectors[&service.id];
        for usage in &usages {
            let f_u = &usage_expectations[&usage.id];
            let value = adaptive_trust(f_s, f_u)? + noise.sample(&mut rng);
            ratings.push(RatingRecord {
                service_id: service.id.clone(),
                usage_id: usage.id.clone(),
                rating: clamp_rating(value),
            });
        }
    }

    let grid = GridSpec::default();
    let mut multi_use = Vec::with_capacity(config.multi_use_items);
    for _ in 0..config.multi_use_items {
        let service = &services[rng.gen_range(0..services.len())];
        let mut picks: Vec<usize> = (0..usages.len()).collect();
        picks.shuffle(&mut rng);
        let chosen: Vec<usize> = picks.into_iter().take(3.min(usages.len())).collect();
        let usage_ids: Vec<String> = chosen.iter().map(|&i| usages[i].id.clone()).collect();
        let durations: Vec<f64> = chosen
            .iter()
            .map(|_| rng.gen_range(15.0..45.0f64).round())
            .collect();
        let expectations: Vec<IndicatorVector> = usage_ids
            .iter()
            .map(|id| usage_expectations[id].clone())
            .collect();
        let significances = usage_significance(&durations)?;
        let aggregate = aggregate_closeness_weighted(&expectations, &significances, &grid)?;
        let value = adaptive_trust(&service_vectors[&service.id], &aggregate.vector)?
            + noise.sample(&mut rng);
        multi_use.push(MultiUseRecord {
            service_id: service.id.clone(),
            usage_ids,
            durations,
            rating: clamp_rating(value),
        });
    }

    let dataset = Dataset {
        schema,
        services,
        usages,
        ratings,
    };
    let truth = GroundTruth {
        service_vectors,
        usage_expectations,
        usage_blocks,
        usage_durations,
    };
    Ok((dataset, truth, multi_use))
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// On-disk shape of services.json: the attribute schema plus the services.
#[derive(Serialize, Deserialize)]
pub struct ServicesFile {
    pub schema: AttributeSchema,
    pub services: Vec<ServiceProfile>,
}

/// Reads a services.json file without cross-file validation.
pub fn load_services(path: &Path) -> Result<ServicesFile> {
    from_json(path, &read_to_string(path)?)
}

/// Reads a usages.json file without cross-file validation.
pub fn load_usages(path: &Path) -> Result<Vec<UsageProfile>> {
    from_json(path, &read_to_string(path)?)
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_string(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

fn from_json<T: serde::de::DeserializeOwned>(path: &Path, contents: &str) -> Result<T> {
    serde_json::from_str(contents)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialization cannot fail");
    s.push('\n');
    s
}

/// Writes ratings.csv, services.json, and usages.json.
pub fn save_dataset(
    dataset: &Dataset,
    ratings_path: &Path,
    services_path: &Path,
    usages_path: &Path,
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["service_id", "usage_id", "rating"])
        .and_then(|()| {
            dataset.ratings.iter().try_for_each(|r| {
                writer.write_record([
                    r.service_id.as_str(),
                    r.usage_id.as_str(),
                    &r.rating.to_string(),
                ])
            })
        })
        .map_err(|e| Error::parse(ratings_path.display().to_string(), e.to_string()))?;
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::parse(ratings_path.display().to_string(), e.to_string()))?;
    write_string(ratings_path, std::str::from_utf8(&bytes).expect("csv is utf-8"))?;

    let services_file = ServicesFile {
        schema: dataset.schema.clone(),
        services: dataset.services.clone(),
    };
    write_string(services_path, &to_json(&services_file))?;
    write_string(usages_path, &to_json(&dataset.usages))?;
    Ok(())
}

/// Reads and validates a dataset from its three files.
pub fn load_dataset(
    ratings_path: &Path,
    services_path: &Path,
    usages_path: &Path,
) -> Result<Dataset> {
    let services_file: ServicesFile =
        from_json(services_path, &read_to_string(services_path)?)?;
    let usages: Vec<UsageProfile> = from_json(usages_path, &read_to_string(usages_path)?)?;

    let contents = read_to_string(ratings_path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(contents.as_bytes());
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(ratings_path.display().to_string(), e.to_string()))?;
        if headers != vec!["service_id", "usage_id", "rating"] {
            return Err(Error::parse(
                format!("{}:1", ratings_path.display()),
                format!("expected header service_id,usage_id,rating, found {headers:?}"),
            ));
        }
    }
    let mut ratings = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let line = index + 2; // 1-based, after the header
        let location = format!("{}:{line}", ratings_path.display());
        let record = record.map_err(|e| Error::parse(location.clone(), e.to_string()))?;
        if record.len() != 3 {
            return Err(Error::parse(
                location,
                format!("expected 3 fields, found {}", record.len()),
            ));
        }
        let rating: u8 = record[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(location.clone(), format!("bad rating {:?}", &record[2])))?;
        ratings.push(RatingRecord {
            service_id: record[0].to_string(),
            usage_id: record[1].to_string(),
            rating,
        });
    }

    let dataset = Dataset {
        schema: services_file.schema,
        services: services_file.services,
        usages,
        ratings,
    };
    let report = crate::domain::validate_dataset(&dataset);
    if !report.is_ok() {
        return Err(Error::InvalidDataset(format!("{:?}", report.findings)));
    }
    Ok(dataset)
}

/// Writes the generator's multi-use session records.
pub fn save_multi_use(records: &[MultiUseRecord], path: &Path) -> Result<()> {
    write_string(path, &to_json(&records.to_vec()))
}

/// Reads multi-use session records.
pub fn load_multi_use(path: &Path) -> Result<Vec<MultiUseRecord>> {
    from_json(path, &read_to_string(path)?)
}

/// Writes the generator ground truth.
pub fn save_ground_truth(truth: &GroundTruth, path: &Path) -> Result<()> {
    write_string(path, &to_json(truth))
}

/// Reads generator ground truth.
pub fn load_ground_truth(path: &Path) -> Result<GroundTruth> {
    from_json(path, &read_to_string(path)?)
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    version: u32,
    indicator_count: usize,
    service_seed: u64,
    usage_seed: u64,
    vocabulary: MetadataVocabulary,
    schema: AttributeSchema,
}

fn check_network(net: &Network, location: &str) -> Result<()> {
    if net.layer_sizes.len() < 2
        || net.weights.len() != net.layer_sizes.len() - 1
        || net.biases.len() != net.layer_sizes.len() - 1
    {
        return Err(Error::parse(location, "layer count mismatch"));
    }
    for (i, (w, b)) in net.weights.iter().zip(&net.biases).enumerate() {
        if w.len() != net.layer_sizes[i] * net.layer_sizes[i + 1] {
            return Err(Error::parse(
                location,
                format!("layer {i} has {} weights, expected {}", w.len(),
                    net.layer_sizes[i] * net.layer_sizes[i + 1]),
            ));
        }
        if b.len() != net.layer_sizes[i + 1] {
            return Err(Error::parse(
                location,
                format!("layer {i} has {} biases, expected {}", b.len(), net.layer_sizes[i + 1]),
            ));
        }
    }
    Ok(())
}

/// Persists a trained model pair as meta.json + two network files.
pub fn save_model_pair(pair: &TrainedModelPair, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let meta = ModelMeta {
        version: MODEL_FORMAT_VERSION,
        indicator_count: pair.indicator_count,
        service_seed: pair.service_model.seed,
        usage_seed: pair.usage_model.seed,
        vocabulary: pair.vocabulary.clone(),
        schema: pair.schema.clone(),
    };
    write_string(&dir.join("meta.json"), &to_json(&meta))?;
    write_string(&dir.join("service_model.json"), &to_json(&pair.service_model))?;
    write_string(&dir.join("usage_model.json"), &to_json(&pair.usage_model))?;
    Ok(())
}

/// Loads a model pair, rejecting unknown format versions and malformed
/// network shapes.
pub fn load_model_pair(dir: &Path) -> Result<TrainedModelPair> {
    let meta_path = dir.join("meta.json");
    let meta: ModelMeta = from_json(&meta_path, &read_to_string(&meta_path)?)?;
    if meta.version != MODEL_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: MODEL_FORMAT_VERSION,
            found: meta.version,
        });
    }
    let service_path = dir.join("service_model.json");
    let service_model: Network = from_json(&service_path, &read_to_string(&service_path)?)?;
    check_network(&service_model, &service_path.display().to_string())?;
    let usage_path = dir.join("usage_model.json");
    let usage_model: Network = from_json(&usage_path, &read_to_string(&usage_path)?)?;
    check_network(&usage_model, &usage_path.display().to_string())?;
    Ok(TrainedModelPair {
        service_model,
        usage_model,
        schema: meta.schema,
        vocabulary: meta.vocabulary,
        indicator_count: meta.indicator_count,
    })
}
