//! Detects how many latent trust indicators drive the ratings of a service
//! type.
//!
//! The idea: a service rated very differently by different usages must be
//! good at some aspects and bad at others, and usages whose ratings correlate
//! across services depend on the same aspects. Clustering each service's
//! per-usage ratings and refining one partition of usages across all services
//! yields the indicator count and the usage blocks behind each indicator.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::domain::Dataset;
use crate::error::{Error, Result};

/// Default gap threshold on the unit rating scale (1.5 raw rating points).
pub const DEFAULT_EPSILON: f64 = 0.15;

/// A group of usages that rated one service (or, in a partition, all
/// services) similarly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageCluster {
    pub members: BTreeSet<String>,
    pub mean_rating: f64,
}

/// The running partition of usages into indicator blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorPartition {
    pub blocks: Vec<UsageCluster>,
    pub epsilon: f64,
}

impl IndicatorPartition {
    pub fn indicator_count(&self) -> usize {
        self.blocks.len()
    }

    /// Index of the block containing `usage_id`, if any.
    pub fn block_of(&self, usage_id: &str) -> Option<usize> {
        self.blocks
            .iter()
            .position(|b| b.members.contains(usage_id))
    }
}

/// 1-D gap clustering of per-usage mean ratings for one service.
///
/// Records are sorted by rating; a new cluster starts whenever the gap
/// between consecutive sorted ratings exceeds `epsilon`.
pub fn cluster_by_rating(
    service_records: &[(String, f64)],
    epsilon: f64,
) -> Result<Vec<UsageCluster>> {
    if service_records.is_empty() {
        return Err(Error::EmptyInput("no records for service".into()));
    }
    if epsilon <= 0.0 {
        return Err(Error::OutOfRange(format!("epsilon {epsilon} must be > 0")));
    }
    let mut sorted: Vec<(String, f64)> = service_records.to_vec();
    sorted.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| a.0.cmp(&b.0)));

    let mut clusters = Vec::new();
    let mut members = BTreeSet::new();
    let mut sum = 0.0;
    let mut prev = sorted[0].1;
    for (id, rating) in sorted {
        if rating - prev > epsilon {
            clusters.push(UsageCluster {
                mean_rating: sum / members.len() as f64,
                members: std::mem::take(&mut members),
            });
            sum = 0.0;
        }
        members.insert(id);
        sum += rating;
        prev = rating;
    }
    clusters.push(UsageCluster {
        mean_rating: sum / members.len() as f64,
        members,
    });
    Ok(clusters)
}

fn intersects(a: &BTreeSet<String>, b: &BTreeSet<String>) -> bool {
    a.intersection(b).next().is_some()
}

fn reference_rating(ratings: &BTreeMap<String, f64>, usage: &str) -> f64 {
    // Usages without any rating fall back to the scale midpoint.
    ratings.get(usage).copied().unwrap_or(0.5)
}

/// Rebuilds block means from the reference ratings, drops duplicate blocks,
/// and keeps each usage in the single block whose mean is nearest to its
/// reference rating so the result stays a partition.
fn normalize_blocks(
    mut blocks: Vec<UsageCluster>,
    ratings: &BTreeMap<String, f64>,
) -> Vec<UsageCluster> {
    blocks.retain(|b| !b.members.is_empty());
    for b in &mut blocks {
        b.mean_rating = b
            .members
            .iter()
            .map(|m| reference_rating(ratings, m))
            .sum::<f64>()
            / b.members.len() as f64;
    }

    let mut deduped: Vec<UsageCluster> = Vec::new();
    for b in blocks {
        if !deduped.iter().any(|d| d.members == b.members) {
            deduped.push(b);
        }
    }

    // Resolve overlaps introduced by the merge branch.
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (i, b) in deduped.iter().enumerate() {
        for m in &b.members {
            let r = reference_rating(ratings, m);
            match seen.get(m) {
                None => {
                    seen.insert(m.clone(), i);
                }
                Some(&j) => {
                    let current = (deduped[j].mean_rating - r).abs();
                    let candidate = (b.mean_rating - r).abs();
                    if candidate < current {
                        seen.insert(m.clone(), i);
                    }
                }
            }
        }
    }
    let mut resolved: Vec<UsageCluster> = deduped
        .iter()
        .enumerate()
        .map(|(i, b)| UsageCluster {
            members: b
                .members
                .iter()
                .filter(|m| seen[*m] == i)
                .cloned()
                .collect(),
            mean_rating: b.mean_rating,
        })
        .collect();
    resolved.retain(|b| !b.members.is_empty());
    for b in &mut resolved {
        b.mean_rating = b
            .members
            .iter()
            .map(|m| reference_rating(ratings, m))
            .sum::<f64>()
            / b.members.len() as f64;
    }
    resolved
}

/// One refinement step: confront the current partition with the clusters of
/// the next service.
///
/// For each block: no intersecting cluster keeps the block; exactly one
/// merges the cluster into the block; several split the block into the
/// nonempty intersections, attaching members unseen on this service to the
/// intersection whose mean rating is nearest. `usage_ratings` supplies the
/// reference rating (global mean) used for attachment and block means.
pub fn refine_partition(
    current: &IndicatorPartition,
    next_clusters: &[UsageCluster],
    usage_ratings: &BTreeMap<String, f64>,
) -> IndicatorPartition {
    let mut result: Vec<UsageCluster> = Vec::new();

    for block in &current.blocks {
        let similar: Vec<&UsageCluster> = next_clusters
            .iter()
            .filter(|s| intersects(&s.members, &block.members))
            .collect();
        match similar.len() {
            0 => result.push(block.clone()),
            1 => {
                let mut members = block.members.clone();
                members.extend(similar[0].members.iter().cloned());
                result.push(UsageCluster {
                    members,
                    mean_rating: block.mean_rating,
                });
            }
            _ => {
                let mut pieces: Vec<UsageCluster> = similar
                    .iter()
                    .map(|s| UsageCluster {
                        members: block.members.intersection(&s.members).cloned().collect(),
                        mean_rating: s.mean_rating,
                    })
                    .collect();
                for member in &block.members {
                    if similar.iter().any(|s| s.members.contains(member)) {
                        continue;
                    }
                    let r = reference_rating(usage_ratings, member);
                    let nearest = pieces
                        .iter_mut()
                        .min_by(|a, b| {
                            (a.mean_rating - r)
                                .abs()
                                .partial_cmp(&(b.mean_rating - r).abs())
                                .unwrap()
                        })
                        .expect("split branch has at least two pieces");
                    nearest.members.insert(member.clone());
                }
                result.extend(pieces);
            }
        }
    }

    IndicatorPartition {
        blocks: normalize_blocks(result, usage_ratings),
        epsilon: current.epsilon,
    }
}

/// Runs the full detection: cluster each service's ratings, seed the
/// partition with the lexicographically first service, refine with each
/// subsequent service, and return the indicator count with the partition.
pub fn detect_indicator_count(
    dataset: &Dataset,
    epsilon: f64,
) -> Result<(usize, IndicatorPartition)> {
    if dataset.ratings.is_empty() {
        return Err(Error::EmptyInput("dataset has no rating records".into()));
    }
    if epsilon <= 0.0 {
        return Err(Error::OutOfRange(format!("epsilon {epsilon} must be > 0")));
    }

    // Per-service per-usage mean normalized ratings, services in ascending id
    // order for reproducibility.
    let mut by_service: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    for ((service_id, usage_id), mean) in dataset.mean_ratings() {
        by_service.entry(service_id).or_default().push((usage_id, mean));
    }
    let global = dataset.global_usage_means();

    let mut services = by_service.into_iter();
    let (_, first_records) = services.next().expect("nonempty ratings");
    let seed = cluster_by_rating(&first_records, epsilon)?;
    let mut partition = IndicatorPartition {
        blocks: normalize_blocks(seed, &global),
        epsilon,
    };

    for (_, records) in services {
        let next = cluster_by_rating(&records, epsilon)?;
        partition = refine_partition(&partition, &next, &global);
        attach_unassigned(
            &mut partition,
            next.iter().flat_map(|c| c.members.iter().map(String::as_str)),
            &global,
        );
    }

    // Usages never rated at all join the block with the nearest mean.
    attach_unassigned(
        &mut partition,
        dataset.usages.iter().map(|u| u.id.as_str()),
        &global,
    );

    Ok((partition.indicator_count(), partition))
}

fn attach_unassigned<'a>(
    partition: &mut IndicatorPartition,
    usages: impl Iterator<Item = &'a str>,
    ratings: &BTreeMap<String, f64>,
) {
    let mut changed = false;
    for usage in usages {
        if partition.block_of(usage).is_some() {
            continue;
        }
        let r = reference_rating(ratings, usage);
        let nearest = partition
            .blocks
            .iter_mut()
            .min_by(|a, b| {
                (a.mean_rating - r)
                    .abs()
                    .partial_cmp(&(b.mean_rating - r).abs())
                    .unwrap()
            })
            .expect("partition has at least one block");
        nearest.members.insert(usage.to_string());
        changed = true;
    }
    if changed {
        partition.blocks = normalize_blocks(std::mem::take(&mut partition.blocks), ratings);
    }
}
