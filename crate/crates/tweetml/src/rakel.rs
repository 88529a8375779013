//! Random k-labelset ensemble: sample m distinct k-subsets of the label
//! space, train one label-powerset classifier per subset, and aggregate
//! per-label votes by average against a threshold.
//!
//! A label's average vote is the number of 1-votes divided by the number of
//! members whose labelset contains it. A bit is set only when the average
//! STRICTLY exceeds the threshold; an average exactly equal to the threshold
//! never sets a bit.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, LabelVector, NUM_LABELS};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, Vocabulary};
use crate::learners::{BaseLearner, LpClassifier};
use crate::seeds::derive_seed;

/// Retries allowed for the label-coverage check before sampling fails.
const COVERAGE_RETRIES: usize = 100;

/// Ensemble configuration: labelset size `k`, member count `m`, vote
/// threshold `epsilon` and the sampling/SGD master seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub k: usize,
    pub m: usize,
    pub epsilon: f64,
    pub seed: u64,
    /// Require every label to be covered by at least one sampled labelset.
    pub coverage_check: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            k: 3,
            m: 10,
            epsilon: 0.5,
            seed: 0,
            coverage_check: true,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > NUM_LABELS {
            return Err(Error::InvalidConfig(format!(
                "labelset size k={} must be in 1..={NUM_LABELS}",
                self.k
            )));
        }
        let max_m = binomial(NUM_LABELS, self.k);
        if self.m == 0 || self.m > max_m {
            return Err(Error::InvalidConfig(format!(
                "model count m={} must be in 1..={max_m} for k={}",
                self.m, self.k
            )));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidConfig(format!(
                "threshold epsilon={} must be in [0, 1)",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Seed for the labelset draw, derived from the master seed.
    pub fn sampling_seed(&self) -> u64 {
        derive_seed(self.seed, "labelsets")
    }

    /// SGD seed for ensemble member `i`, derived from the master seed.
    pub fn member_seed(&self, i: usize) -> u64 {
        derive_seed(self.seed, &format!("member-{i}"))
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result = 1usize;
    for i in 0..k {
        result = result * (n - i) / (i + 1);
    }
    result
}

/// All k-subsets of `0..m` in lexicographic order.
fn enumerate_subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binomial(m, k));
    let mut current = Vec::with_capacity(k);
    fn recurse(start: usize, m: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..m {
            current.push(i);
            recurse(i + 1, m, k, current, out);
            current.pop();
        }
    }
    recurse(0, m, k, &mut current, &mut out);
    out
}

/// Draw `m` distinct k-subsets of `0..num_labels`, deterministically per
/// seed. With `coverage_check`, draws are retried until every label appears
/// in at least one subset; if the bound is exhausted the error names the
/// uncovered labels.
pub fn sample_labelsets(
    num_labels: usize,
    k: usize,
    m: usize,
    seed: u64,
    coverage_check: bool,
) -> Result<Vec<Vec<usize>>> {
    let candidates = enumerate_subsets(num_labels, k);
    if m > candidates.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot sample {m} distinct labelsets of size {k} from {num_labels} labels (max {})",
            candidates.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_uncovered = Vec::new();
    for _ in 0..COVERAGE_RETRIES {
        // partial Fisher-Yates: the first m slots are a uniform distinct draw
        let mut indices: Vec<usize> = (0..candidates.len()).collect();
        for i in 0..m {
            let j = rng.gen_range(i..indices.len());
            indices.swap(i, j);
        }
        let draw: Vec<Vec<usize>> = indices[..m].iter().map(|&i| candidates[i].clone()).collect();

        if !coverage_check {
            return Ok(draw);
        }
        let mut covered = vec![false; num_labels];
        for subset in &draw {
            for &label in subset {
                covered[label] = true;
            }
        }
        if covered.iter().all(|&c| c) {
            return Ok(draw);
        }
        last_uncovered = (0..num_labels).filter(|&l| !covered[l]).collect();
    }
    Err(Error::InvalidConfig(format!(
        "could not cover labels {last_uncovered:?} within {COVERAGE_RETRIES} sampling retries; \
         increase m or disable the coverage check"
    )))
}

/// Per-label vote accumulator: `sums[j]` counts 1-votes, `votes[j]` counts
/// members voting on label `j` at all.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteTally {
    sums: [u32; NUM_LABELS],
    votes: [u32; NUM_LABELS],
}

impl VoteTally {
    pub fn new() -> Self {
        VoteTally::default()
    }

    /// Accrue one member's `(label, vote)` pairs.
    pub fn accrue(&mut self, member_votes: &[(usize, bool)]) {
        for &(label, vote) in member_votes {
            self.votes[label] += 1;
            if vote {
                self.sums[label] += 1;
            }
        }
    }

    /// Merge another tally in; aggregation is associative so any merge order
    /// is valid.
    pub fn merge(&mut self, other: &VoteTally) {
        for j in 0..NUM_LABELS {
            self.sums[j] += other.sums[j];
            self.votes[j] += other.votes[j];
        }
    }

    pub fn sum(&self, label: usize) -> u32 {
        self.sums[label]
    }

    pub fn votes(&self, label: usize) -> u32 {
        self.votes[label]
    }

    /// Average vote for a label; `None` when no member voted on it.
    pub fn average(&self, label: usize) -> Option<f64> {
        if self.votes[label] == 0 {
            None
        } else {
            Some(self.sums[label] as f64 / self.votes[label] as f64)
        }
    }

    /// Threshold the averages into a (possibly invalid) label vector. Bit j
    /// is set iff the label received votes and `sum/votes > epsilon`
    /// strictly; uncovered labels stay 0. The comparison multiplies through
    /// by the vote count to avoid division rounding.
    pub fn threshold(&self, epsilon: f64) -> LabelVector {
        let mut bits = [false; NUM_LABELS];
        for (j, bit) in bits.iter_mut().enumerate() {
            *bit = self.votes[j] > 0 && self.sums[j] as f64 > epsilon * self.votes[j] as f64;
        }
        LabelVector::from_bits(bits)
    }
}

/// A trained ensemble: one label-powerset classifier per sampled labelset,
/// plus the voting configuration. Immutable after training.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleModel {
    config: EnsembleConfig,
    members: Vec<LpClassifier>,
    vocab_hash: u64,
}

impl EnsembleModel {
    /// Train one member per sampled labelset. Member SGD seeds derive from
    /// the config seed, so the whole ensemble reproduces from one integer.
    pub fn train(
        train: &Dataset,
        vocab: &Vocabulary,
        config: &EnsembleConfig,
        base: &BaseLearner,
    ) -> Result<Self> {
        config.validate()?;
        if !train.is_fully_labeled() {
            return Err(Error::InvalidData(
                "ensemble training requires a fully labeled dataset".into(),
            ));
        }
        let vectors = vocab.featurize_all(train);
        let golds = train.gold_labels()?;
        Self::train_on_vectors(&vectors, &golds, vocab.hash(), config, base)
    }

    /// Train from already-featurized examples (the feature cache path).
    pub fn train_on_vectors(
        vectors: &[FeatureVector],
        golds: &[LabelVector],
        vocab_hash: u64,
        config: &EnsembleConfig,
        base: &BaseLearner,
    ) -> Result<Self> {
        config.validate()?;
        let labelsets = sample_labelsets(
            NUM_LABELS,
            config.k,
            config.m,
            config.sampling_seed(),
            config.coverage_check,
        )?;
        let mut members = Vec::with_capacity(labelsets.len());
        for (i, labelset) in labelsets.iter().enumerate() {
            let seeded = base.with_seed(config.member_seed(i));
            let member = LpClassifier::train(vectors, golds, labelset, &seeded)
                .map_err(|e| Error::Training(format!("labelset {labelset:?}: {e}")))?;
            members.push(member);
        }
        Ok(EnsembleModel {
            config: *config,
            members,
            vocab_hash,
        })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn members(&self) -> &[LpClassifier] {
        &self.members
    }

    pub fn labelsets(&self) -> Vec<&[usize]> {
        self.members.iter().map(|m| m.labelset()).collect()
    }

    pub fn vocab_hash(&self) -> u64 {
        self.vocab_hash
    }

    /// Accrue every member's votes on a query.
    pub fn predict_votes(&self, query: &FeatureVector) -> VoteTally {
        let mut tally = VoteTally::new();
        for member in &self.members {
            tally.accrue(&member.predict_votes(query));
        }
        tally
    }

    /// Vote, then threshold with the configured epsilon. The result may
    /// violate the one-purpose/one-position constraint; see the postprocess
    /// module for repair.
    pub fn predict(&self, query: &FeatureVector) -> LabelVector {
        self.predict_votes(query).threshold(self.config.epsilon)
    }

    /// Serialize to a JSON archive.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), self)
            .map_err(|e| Error::InvalidData(format!("serialize ensemble: {e}")))
    }

    /// Load an archive, refusing one built against a different vocabulary.
    pub fn load(path: &Path, vocab: &Vocabulary) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let model: EnsembleModel = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::InvalidData(format!("deserialize ensemble: {e}")))?;
        if model.vocab_hash != vocab.hash() {
            return Err(Error::VocabularyMismatch {
                expected: model.vocab_hash,
                found: vocab.hash(),
            });
        }
        Ok(model)
    }
}
