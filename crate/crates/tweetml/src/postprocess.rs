//! KNN-based repair of predictions that violate the one-purpose +
//! one-position constraint.
//!
//! A violating prediction borrows the gold labels of the K training tweets
//! most similar to it (cosine). The summation strategy scores each candidate
//! label by its neighbor count; the weighted summation strategy scores it by
//! the sum of neighbor similarities. The argmax is taken per violated label
//! group, so a repaired prediction always carries exactly one purpose and one
//! position bit.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, LabelVector, POSITION_RANGE, PURPOSE_RANGE};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, Vocabulary};
use crate::learners::cosine_similarity;

/// Repair strategy selection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Leave violating predictions as they are.
    None,
    Sum,
    #[default]
    Wsum,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::None => "none",
            Strategy::Sum => "sum",
            Strategy::Wsum => "wsum",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Strategy::None),
            "sum" => Ok(Strategy::Sum),
            "wsum" => Ok(Strategy::Wsum),
            other => Err(Error::InvalidConfig(format!(
                "unknown strategy {other:?} (expected none, sum or wsum)"
            ))),
        }
    }
}

/// Which label groups a repair rewrites.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairScope {
    /// Rewrite only groups that violate the constraint (default).
    #[default]
    ViolatedGroupsOnly,
    /// Once any violation triggers, re-derive both groups from neighbors.
    FullRelabel,
}

/// Post-processing configuration: strategy, neighbor count K and scope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostprocessConfig {
    pub strategy: Strategy,
    pub k: usize,
    pub scope: RepairScope,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        PostprocessConfig {
            strategy: Strategy::Wsum,
            k: 10,
            scope: RepairScope::ViolatedGroupsOnly,
        }
    }
}

impl PostprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig(
                "postprocess neighbor count K must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-group violation flags for a prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairFlags {
    pub purpose: bool,
    pub position: bool,
}

impl RepairFlags {
    pub fn any(&self) -> bool {
        self.purpose || self.position
    }

    pub fn both() -> Self {
        RepairFlags {
            purpose: true,
            position: true,
        }
    }
}

/// A group violates when its bit count differs from exactly one.
pub fn needs_repair(pred: &LabelVector) -> RepairFlags {
    RepairFlags {
        purpose: pred.purpose_count() != 1,
        position: pred.position_count() != 1,
    }
}

/// One training neighbor of a query: training index, cosine similarity and
/// gold labels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub index: usize,
    pub similarity: f64,
    pub labels: LabelVector,
}

/// Neighbors ordered by descending similarity (ties by lower training
/// index).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet(Vec<Neighbor>);

impl NeighborSet {
    pub fn new(mut neighbors: Vec<Neighbor>) -> Self {
        neighbors.sort_by(|a, b| {
            b.similarity
                .partial_cmp(&a.similarity)
                .unwrap_or(Ordering::Equal)
                .then(a.index.cmp(&b.index))
        });
        NeighborSet(neighbors)
    }

    pub fn neighbors(&self) -> &[Neighbor] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Restrict to the closest `k` neighbors.
    pub fn truncated(&self, k: usize) -> NeighborSet {
        NeighborSet(self.0.iter().take(k).copied().collect())
    }
}

/// Featurized training set prepared for repeated neighbor lookups.
#[derive(Clone, Debug)]
pub struct TrainingIndex {
    vectors: Vec<FeatureVector>,
    golds: Vec<LabelVector>,
}

impl TrainingIndex {
    pub fn new(vectors: Vec<FeatureVector>, golds: Vec<LabelVector>) -> Result<Self> {
        if vectors.is_empty() || vectors.len() != golds.len() {
            return Err(Error::InvalidData(
                "neighbor index needs a non-empty, aligned training set".into(),
            ));
        }
        Ok(TrainingIndex { vectors, golds })
    }

    /// Build from a labeled dataset under a frozen vocabulary.
    pub fn from_dataset(train: &Dataset, vocab: &Vocabulary) -> Result<Self> {
        Self::new(vocab.featurize_all(train), train.gold_labels()?)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Top-K training tweets by cosine similarity to the query. K beyond the
    /// training size saturates at all neighbors.
    pub fn find_neighbors(&self, query: &FeatureVector, k: usize) -> NeighborSet {
        let all: Vec<Neighbor> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(index, v)| Neighbor {
                index,
                similarity: cosine_similarity(query, v),
                labels: self.golds[index],
            })
            .collect();
        NeighborSet::new(all).truncated(k)
    }
}

/// Look up the K most similar training tweets for a query.
pub fn find_neighbors(
    query: &FeatureVector,
    train: &Dataset,
    vocab: &Vocabulary,
    k: usize,
) -> Result<NeighborSet> {
    Ok(TrainingIndex::from_dataset(train, vocab)?.find_neighbors(query, k))
}

/// Per-label scores of one repair decision, kept for the audit log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairEvent {
    pub tweet_id: String,
    pub strategy: Strategy,
    pub repaired_purpose: bool,
    pub repaired_position: bool,
    /// `(training index, similarity)` of each consulted neighbor.
    pub neighbors: Vec<(usize, f64)>,
    pub purpose_scores: Option<Vec<f64>>,
    pub position_scores: Option<Vec<f64>>,
    pub before: LabelVector,
    pub after: LabelVector,
}

/// Candidate label scores within one group, repair picks the argmax (ties to
/// the lower index).
fn group_scores(
    neighbors: &NeighborSet,
    range: std::ops::Range<usize>,
    weighted: bool,
) -> Vec<f64> {
    range
        .map(|label| {
            neighbors
                .neighbors()
                .iter()
                .filter(|n| n.labels.get(label))
                .map(|n| if weighted { n.similarity } else { 1.0 })
                .sum()
        })
        .collect()
}

fn argmax_lower_tie(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

fn repair_groups(
    neighbors: &NeighborSet,
    pred: &LabelVector,
    flags: RepairFlags,
    weighted: bool,
) -> (LabelVector, Option<Vec<f64>>, Option<Vec<f64>>) {
    // an all-zero-similarity neighborhood gives wsum no signal: fall back to
    // plain counts
    let weighted = weighted
        && neighbors
            .neighbors()
            .iter()
            .any(|n| n.similarity != 0.0);

    let mut repaired = *pred;
    let mut purpose_scores = None;
    let mut position_scores = None;
    if flags.purpose {
        let scores = group_scores(neighbors, PURPOSE_RANGE, weighted);
        let winner = argmax_lower_tie(&scores);
        for i in PURPOSE_RANGE {
            repaired.set(i, i == PURPOSE_RANGE.start + winner);
        }
        purpose_scores = Some(scores);
    }
    if flags.position {
        let scores = group_scores(neighbors, POSITION_RANGE, weighted);
        let winner = argmax_lower_tie(&scores);
        for i in POSITION_RANGE {
            repaired.set(i, i == POSITION_RANGE.start + winner);
        }
        position_scores = Some(scores);
    }
    (repaired, purpose_scores, position_scores)
}

/// Summation strategy: each flagged group takes the label most frequent
/// among the neighbors' gold vectors. Unflagged group bits are preserved.
pub fn repair_sum(
    neighbors: &NeighborSet,
    pred: &LabelVector,
    flags: RepairFlags,
) -> LabelVector {
    repair_groups(neighbors, pred, flags, false).0
}

/// Weighted summation strategy: neighbor votes are weighted by similarity
/// before the per-group argmax.
pub fn repair_wsum(
    neighbors: &NeighborSet,
    pred: &LabelVector,
    flags: RepairFlags,
) -> LabelVector {
    repair_groups(neighbors, pred, flags, true).0
}

/// Repair one prediction per the configured strategy and scope. Returns the
/// (possibly unchanged) prediction and an audit event when a repair fired.
pub fn repair_prediction(
    pred: &LabelVector,
    query: &FeatureVector,
    index: &TrainingIndex,
    config: &PostprocessConfig,
    tweet_id: &str,
) -> (LabelVector, Option<RepairEvent>) {
    if config.strategy == Strategy::None {
        return (*pred, None);
    }
    let violations = needs_repair(pred);
    if !violations.any() {
        return (*pred, None);
    }
    let flags = match config.scope {
        RepairScope::ViolatedGroupsOnly => violations,
        RepairScope::FullRelabel => RepairFlags::both(),
    };
    let neighbors = index.find_neighbors(query, config.k);
    let weighted = config.strategy == Strategy::Wsum;
    let (after, purpose_scores, position_scores) =
        repair_groups(&neighbors, pred, flags, weighted);
    let event = RepairEvent {
        tweet_id: tweet_id.to_string(),
        strategy: config.strategy,
        repaired_purpose: flags.purpose,
        repaired_position: flags.position,
        neighbors: neighbors
            .neighbors()
            .iter()
            .map(|n| (n.index, n.similarity))
            .collect(),
        purpose_scores,
        position_scores,
        before: *pred,
        after,
    };
    (after, Some(event))
}
