//! Domain types, validation, and normalization shared by every other module.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One attribute value of a service: either a categorical label or a number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttributeValue {
    Categorical(String),
    Numeric(f64),
}

/// Kind of a declared attribute, with its admissible values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AttributeKind {
    Categorical { categories: Vec<String> },
    Numeric { min: f64, max: f64 },
}

/// A single attribute declaration in the dataset-wide schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDecl {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttributeKind,
}

/// Ordered attribute declarations shared by every service in a dataset.
///
/// The schema is declared up front (in the services file header), never
/// inferred, so the encoded model input width is stable across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub attributes: Vec<AttributeDecl>,
}

impl AttributeSchema {
    /// Total width of the encoded attribute vector: one slot per category of
    /// each categorical attribute, one slot per numeric attribute.
    pub fn encoded_width(&self) -> usize {
        self.attributes
            .iter()
            .map(|a| match &a.kind {
                AttributeKind::Categorical { categories } => categories.len(),
                AttributeKind::Numeric { .. } => 1,
            })
            .sum()
    }
}

/// Identity and inherent characteristics of one crowdsourced IoT service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceProfile {
    pub id: String,
    #[serde(default)]
    pub owner: String,
    #[serde(default)]
    pub device: String,
    #[serde(default)]
    pub functions: Vec<String>,
    #[serde(default)]
    pub qos: BTreeMap<String, f64>,
    pub attributes: BTreeMap<String, AttributeValue>,
}

/// One way a consumer employs a service, described by metadata words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageProfile {
    pub id: String,
    pub metadata: BTreeSet<String>,
    pub avg_duration_minutes: f64,
}

/// One consumer's rating of one service under one usage. The training atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub service_id: String,
    pub usage_id: String,
    pub rating: u8,
}

/// Per-indicator trust values in `[0, 1]`.
///
/// Used both for a service's trust at each indicator and for a usage's
/// expected trust at each indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorVector(pub Vec<f64>);

impl IndicatorVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange(format!(
                "indicator component {v} outside [0, 1]"
            )));
        }
        Ok(IndicatorVector(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// The set of usages a consumer exercises within one service session,
/// optionally weighted by significance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsagePattern {
    pub usages: Vec<String>,
    pub significances: Option<Vec<f64>>,
}

impl UsagePattern {
    pub fn new(usages: Vec<String>, significances: Option<Vec<f64>>) -> Result<Self> {
        if usages.is_empty() {
            return Err(Error::EmptyInput("usage pattern has no usages".into()));
        }
        if let Some(sig) = &significances {
            if sig.len() != usages.len() {
                return Err(Error::LengthMismatch(format!(
                    "{} significances for {} usages",
                    sig.len(),
                    usages.len()
                )));
            }
            if sig.iter().any(|s| *s < 0.0) {
                return Err(Error::OutOfRange("negative significance".into()));
            }
            let total: f64 = sig.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::OutOfRange(format!(
                    "significances sum to {total}, expected 1"
                )));
            }
        }
        Ok(UsagePattern {
            usages,
            significances,
        })
    }
}

/// A full marketplace dataset: schema, profiles, and rating records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: AttributeSchema,
    pub services: Vec<ServiceProfile>,
    pub usages: Vec<UsageProfile>,
    pub ratings: Vec<RatingRecord>,
}

impl Dataset {
    pub fn service(&self, id: &str) -> Option<&ServiceProfile> {
        self.services.iter().find(|s| s.id == id)
    }

    pub fn usage(&self, id: &str) -> Option<&UsageProfile> {
        self.usages.iter().find(|u| u.id == id)
    }

    /// Mean normalized rating per (service, usage) pair. Repeated ratings of
    /// the same pair are averaged here, at label-derivation time.
    pub fn mean_ratings(&self) -> BTreeMap<(String, String), f64> {
        let mut sums: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
        for r in &self.ratings {
            let e = sums
                .entry((r.service_id.clone(), r.usage_id.clone()))
                .or_insert((0.0, 0));
            e.0 += f64::from(r.rating) / 10.0;
            e.1 += 1;
        }
        sums.into_iter()
            .map(|(k, (sum, n))| (k, sum / n as f64))
            .collect()
    }

    /// Mean normalized rating per usage over every record, regardless of
    /// service. Usages with no ratings are absent.
    pub fn global_usage_means(&self) -> BTreeMap<String, f64> {
        let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for r in &self.ratings {
            let e = sums.entry(r.usage_id.clone()).or_insert((0.0, 0));
            e.0 += f64::from(r.rating) / 10.0;
            e.1 += 1;
        }
        sums.into_iter()
            .map(|(k, (sum, n))| (k, sum / n as f64))
            .collect()
    }
}

/// Maps a 1..10 rating onto the unit trust scale.
pub fn normalize_rating(r: u8) -> Result<f64> {
    if !(1..=10).contains(&r) {
        return Err(Error::OutOfRange(format!("rating {r} outside 1..10")));
    }
    Ok(f64::from(r) / 10.0)
}

/// One problem discovered while validating a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Finding {
    DanglingServiceRef { record_index: usize, service_id: String },
    DanglingUsageRef { record_index: usize, usage_id: String },
    RatingOutOfRange { record_index: usize, rating: u8 },
    DuplicateServiceId { service_id: String },
    DuplicateUsageId { usage_id: String },
    AttributeViolation { service_id: String, detail: String },
    UnknownMetadataWord { usage_id: String, word: String },
    EmptyAttributeMap { service_id: String },
}

/// Outcome of [`validate_dataset`]. The dataset is accepted iff empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.findings.is_empty()
    }
}

fn check_attribute(decl: &AttributeDecl, value: &AttributeValue) -> Option<String> {
    match (&decl.kind, value) {
        (AttributeKind::Categorical { categories }, AttributeValue::Categorical(v)) => {
            if categories.contains(v) {
                None
            } else {
                Some(format!("category {v:?} not declared for {}", decl.name))
            }
        }
        (AttributeKind::Numeric { min, max }, AttributeValue::Numeric(v)) => {
            if *v >= *min && *v <= *max {
                None
            } else {
                Some(format!("{v} outside [{min}, {max}] for {}", decl.name))
            }
        }
        _ => Some(format!("value kind does not match schema for {}", decl.name)),
    }
}

/// Checks referential integrity, rating ranges, id uniqueness, and schema
/// conformance. Findings are reported rather than raised so callers can show
/// everything wrong with a dataset at once.
pub fn validate_dataset(dataset: &Dataset) -> ValidationReport {
    let mut findings = Vec::new();

    let mut service_ids: HashSet<&str> = HashSet::new();
    for s in &dataset.services {
        if !service_ids.insert(&s.id) {
            findings.push(Finding::DuplicateServiceId {
                service_id: s.id.clone(),
            });
        }
        if s.attributes.is_empty() {
            findings.push(Finding::EmptyAttributeMap {
                service_id: s.id.clone(),
            });
        }
        let declared: HashMap<&str, &AttributeDecl> = dataset
            .schema
            .attributes
            .iter()
            .map(|d| (d.name.as_str(), d))
            .collect();
        for (name, value) in &s.attributes {
            match declared.get(name.as_str()) {
                None => findings.push(Finding::AttributeViolation {
                    service_id: s.id.clone(),
                    detail: format!("attribute {name} not in schema"),
                }),
                Some(decl) => {
                    if let Some(detail) = check_attribute(decl, value) {
                        findings.push(Finding::AttributeViolation {
                            service_id: s.id.clone(),
                            detail,
                        });
                    }
                }
            }
        }
        for decl in &dataset.schema.attributes {
            if !s.attributes.contains_key(&decl.name) {
                findings.push(Finding::AttributeViolation {
                    service_id: s.id.clone(),
                    detail: format!("missing attribute {}", decl.name),
                });
            }
        }
    }

    let mut usage_ids: HashSet<&str> = HashSet::new();
    for u in &dataset.usages {
        if !usage_ids.insert(&u.id) {
            findings.push(Finding::DuplicateUsageId {
                usage_id: u.id.clone(),
            });
        }
    }

    for (i, r) in dataset.ratings.iter().enumerate() {
        if !(1..=10).contains(&r.rating) {
            findings.push(Finding::RatingOutOfRange {
                record_index: i,
                rating: r.rating,
            });
        }
        if !service_ids.contains(r.service_id.as_str()) {
            findings.push(Finding::DanglingServiceRef {
                record_index: i,
                service_id: r.service_id.clone(),
            });
        }
        if !usage_ids.contains(r.usage_id.as_str()) {
            findings.push(Finding::DanglingUsageRef {
                record_index: i,
                usage_id: r.usage_id.clone(),
            });
        }
    }

    ValidationReport { findings }
}
