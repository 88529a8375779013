//! From-scratch single-label classifiers and the label-powerset
//! meta-classifier built on them.
//!
//! The linear SVM is a one-vs-rest hinge-loss model fit by seeded SGD with
//! the 1/(λt) step schedule; training is bitwise deterministic for a fixed
//! data order, seed and hyperparameters. KNN uses cosine similarity, the same
//! metric the post-processing stage uses.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::LabelVector;
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::seeds::derive_seed;

/// Cosine of the angle between two sparse vectors. Either zero norm yields 0.
pub fn cosine_similarity(a: &FeatureVector, b: &FeatureVector) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.dot(b) / (na * nb)
}

// ---------------------------------------------------------------------------
// KNN
// ---------------------------------------------------------------------------

/// K-nearest-neighbor classifier over cosine similarity.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KnnClassifier {
    vectors: Vec<FeatureVector>,
    classes: Vec<usize>,
    k: usize,
}

impl KnnClassifier {
    pub fn fit(vectors: Vec<FeatureVector>, classes: Vec<usize>, k: usize) -> Result<Self> {
        if vectors.is_empty() || vectors.len() != classes.len() {
            return Err(Error::InvalidData(
                "knn needs a non-empty, aligned training set".into(),
            ));
        }
        if k == 0 {
            return Err(Error::InvalidConfig("knn neighbor count must be >= 1".into()));
        }
        Ok(KnnClassifier {
            vectors,
            classes,
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Majority class among the K most similar training vectors. Ties break
    /// by larger summed similarity, then by lower class id. Similarity ties
    /// in the neighbor cut-off break by lower training index.
    pub fn predict(&self, query: &FeatureVector) -> usize {
        let mut sims: Vec<(f64, usize)> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| (cosine_similarity(query, v), i))
            .collect();
        sims.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
        });
        let take = self.k.min(sims.len());

        let mut tallies: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
        for &(sim, idx) in &sims[..take] {
            let entry = tallies.entry(self.classes[idx]).or_insert((0, 0.0));
            entry.0 += 1;
            entry.1 += sim;
        }
        let mut best: Option<(usize, usize, f64)> = None;
        for (&class, &(count, sim_sum)) in &tallies {
            let better = match best {
                None => true,
                Some((_, c, s)) => count > c || (count == c && sim_sum > s),
            };
            if better {
                best = Some((class, count, sim_sum));
            }
        }
        best.expect("training set is non-empty").0
    }
}

// ---------------------------------------------------------------------------
// Linear SVM
// ---------------------------------------------------------------------------

/// SGD hyperparameters: L2 regularization strength, epoch count and seed.
/// The step size follows the 1/(λt) schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmHyper {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmHyper {
    fn default() -> Self {
        SvmHyper {
            lambda: 1e-4,
            epochs: 50,
            seed: 0,
        }
    }
}

/// One-vs-rest linear SVM with per-class weight vectors and biases.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearSvm {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    dimension: usize,
    hyper: SvmHyper,
    /// Per-epoch training objective (hinge + regularizer, summed over
    /// classes), recorded for monitoring.
    objective_history: Vec<f64>,
}

impl LinearSvm {
    /// Fit on `(vector, class)` pairs. Class ids must be contiguous from 0
    /// with at least two distinct classes and at least one example each.
    pub fn train(
        vectors: &[FeatureVector],
        classes: &[usize],
        hyper: &SvmHyper,
    ) -> Result<Self> {
        if vectors.is_empty() || vectors.len() != classes.len() {
            return Err(Error::InvalidData(
                "svm needs a non-empty, aligned training set".into(),
            ));
        }
        if hyper.lambda <= 0.0 || hyper.epochs == 0 {
            return Err(Error::InvalidConfig(
                "svm needs lambda > 0 and at least one epoch".into(),
            ));
        }
        let n_classes = classes.iter().max().unwrap() + 1;
        if n_classes < 2 {
            return Err(Error::Training(
                "single-class training data: use a constant classifier instead".into(),
            ));
        }
        for c in 0..n_classes {
            if !classes.contains(&c) {
                return Err(Error::Training(format!("class {c} has no examples")));
            }
        }
        let dimension = vectors[0].dimension();

        let mut weights = Vec::with_capacity(n_classes);
        let mut biases = vec![0.0; n_classes];
        let mut per_class_obj: Vec<Vec<f64>> = Vec::with_capacity(n_classes);

        for class in 0..n_classes {
            let targets: Vec<f64> = classes
                .iter()
                .map(|&c| if c == class { 1.0 } else { -1.0 })
                .collect();
            let (w, b, obj) = train_binary(vectors, &targets, hyper, class);
            weights.push(w);
            biases[class] = b;
            per_class_obj.push(obj);
        }

        let objective_history = (0..hyper.epochs)
            .map(|e| per_class_obj.iter().map(|h| h[e]).sum())
            .collect();

        Ok(LinearSvm {
            weights,
            biases,
            dimension,
            hyper: *hyper,
            objective_history,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.weights.len()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn objective_history(&self) -> &[f64] {
        &self.objective_history
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Per-class decision scores for a query.
    pub fn scores(&self, query: &FeatureVector) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, &b)| query.iter().map(|&(i, v)| w[i] * v).sum::<f64>() + b)
            .collect()
    }

    /// Argmax over class scores; ties break to the lower class id.
    pub fn predict(&self, query: &FeatureVector) -> usize {
        let scores = self.scores(query);
        let mut best = 0;
        for (c, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = c;
            }
        }
        best
    }

    /// Fraction of training examples predicted correctly.
    pub fn accuracy(&self, vectors: &[FeatureVector], classes: &[usize]) -> f64 {
        let correct = vectors
            .iter()
            .zip(classes)
            .filter(|(v, &c)| self.predict(v) == c)
            .count();
        correct as f64 / vectors.len() as f64
    }
}

/// Pegasos-style binary hinge SGD. Keeps the weight vector as
/// `scale * values` so the per-step shrink stays O(nnz).
fn train_binary(
    vectors: &[FeatureVector],
    targets: &[f64],
    hyper: &SvmHyper,
    class: usize,
) -> (Vec<f64>, f64, Vec<f64>) {
    let dim = vectors[0].dimension();
    let n = vectors.len();
    let lambda = hyper.lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(hyper.seed, &format!("ovr-{class}")));
    let mut order: Vec<usize> = (0..n).collect();

    let mut values = vec![0.0; dim];
    let mut scale = 1.0f64;
    let mut bias = 0.0f64;
    let mut t = 0u64;
    let mut objective = Vec::with_capacity(hyper.epochs);

    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let x = &vectors[i];
            let y = targets[i];
            let margin = y * (scale * x.iter().map(|&(j, v)| values[j] * v).sum::<f64>() + bias);

            scale *= 1.0 - eta * lambda;
            if scale == 0.0 {
                // only at t = 1, where the weight vector is still zero
                values.iter_mut().for_each(|v| *v = 0.0);
                scale = 1.0;
            }
            if margin < 1.0 {
                let step = eta * y / scale;
                for &(j, v) in x.iter() {
                    values[j] += step * v;
                }
                bias += eta * y;
            }
        }

        let norm_sq: f64 = values.iter().map(|v| v * v).sum::<f64>() * scale * scale;
        let hinge: f64 = vectors
            .iter()
            .zip(targets)
            .map(|(x, &y)| {
                let s = scale * x.iter().map(|&(j, v)| values[j] * v).sum::<f64>() + bias;
                (1.0 - y * s).max(0.0)
            })
            .sum::<f64>()
            / n as f64;
        objective.push(lambda / 2.0 * norm_sq + hinge);
    }

    let weights = values.iter().map(|v| v * scale).collect();
    (weights, bias, objective)
}

// ---------------------------------------------------------------------------
// Label powerset
// ---------------------------------------------------------------------------

/// Base learner used inside a label-powerset classifier.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum BaseLearner {
    Svm(SvmHyper),
    /// KNN base; `k = 1` turns the classifier into a training-set memorizer.
    Knn { k: usize },
}

impl Default for BaseLearner {
    fn default() -> Self {
        BaseLearner::Svm(SvmHyper::default())
    }
}

impl BaseLearner {
    /// Copy with the SGD seed replaced; KNN has no randomness.
    pub fn with_seed(&self, seed: u64) -> BaseLearner {
        match self {
            BaseLearner::Svm(hyper) => BaseLearner::Svm(SvmHyper { seed, ..*hyper }),
            BaseLearner::Knn { k } => BaseLearner::Knn { k: *k },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
enum InnerModel {
    /// All training examples shared one projected pattern.
    Constant,
    Svm(LinearSvm),
    Knn(KnnClassifier),
}

/// Label-powerset classifier bound to one k-subset of the label space. Each
/// distinct projection of the training labels onto the labelset becomes one
/// meta-class of a single-label problem.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LpClassifier {
    labelset: Vec<usize>,
    /// Codebook: meta-class id = index into this sorted pattern list. Each
    /// pattern is a bitmask over labelset positions.
    patterns: Vec<u8>,
    inner: InnerModel,
}

impl LpClassifier {
    /// Train on featurized examples with gold label vectors. `labelset` holds
    /// global label indices (sorted, distinct).
    pub fn train(
        vectors: &[FeatureVector],
        golds: &[LabelVector],
        labelset: &[usize],
        base: &BaseLearner,
    ) -> Result<Self> {
        if vectors.is_empty() || vectors.len() != golds.len() {
            return Err(Error::InvalidData(
                "label-powerset training needs aligned, non-empty data".into(),
            ));
        }
        if labelset.is_empty() || labelset.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "labelset must be non-empty, sorted and distinct".into(),
            ));
        }

        let masks: Vec<u8> = golds.iter().map(|g| project(g, labelset)).collect();
        let mut patterns: Vec<u8> = masks.clone();
        patterns.sort_unstable();
        patterns.dedup();

        let inner = if patterns.len() == 1 {
            InnerModel::Constant
        } else {
            let classes: Vec<usize> = masks
                .iter()
                .map(|m| patterns.binary_search(m).expect("pattern in codebook"))
                .collect();
            match base {
                BaseLearner::Svm(hyper) => {
                    InnerModel::Svm(LinearSvm::train(vectors, &classes, hyper)?)
                }
                BaseLearner::Knn { k } => {
                    InnerModel::Knn(KnnClassifier::fit(vectors.to_vec(), classes, *k)?)
                }
            }
        };

        Ok(LpClassifier {
            labelset: labelset.to_vec(),
            patterns,
            inner,
        })
    }

    pub fn labelset(&self) -> &[usize] {
        &self.labelset
    }

    /// Observed projected patterns, one per meta-class.
    pub fn patterns(&self) -> &[u8] {
        &self.patterns
    }

    /// Meta-class id of a gold vector's projection, if that pattern was
    /// observed in training.
    pub fn encode(&self, gold: &LabelVector) -> Option<usize> {
        self.patterns.binary_search(&project(gold, &self.labelset)).ok()
    }

    /// Pattern mask of a meta-class id.
    pub fn decode(&self, class: usize) -> u8 {
        self.patterns[class]
    }

    /// Predict and decode to `(label index, vote)` pairs over the labelset.
    /// Labels outside the labelset carry no vote.
    pub fn predict_votes(&self, query: &FeatureVector) -> Vec<(usize, bool)> {
        let mask = match &self.inner {
            InnerModel::Constant => self.patterns[0],
            InnerModel::Svm(svm) => self.patterns[svm.predict(query)],
            InnerModel::Knn(knn) => self.patterns[knn.predict(query)],
        };
        self.labelset
            .iter()
            .enumerate()
            .map(|(pos, &label)| (label, mask >> pos & 1 == 1))
            .collect()
    }
}

/// Project a label vector onto a labelset: bit `pos` of the result is the
/// gold bit of `labelset[pos]`.
fn project(gold: &LabelVector, labelset: &[usize]) -> u8 {
    let mut mask = 0u8;
    for (pos, &label) in labelset.iter().enumerate() {
        if gold.get(label) {
            mask |= 1 << pos;
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn vector(entries: &[(usize, f64)], dim: usize) -> FeatureVector {
        FeatureVector::from_map(entries.iter().copied().collect::<BTreeMap<_, _>>(), dim)
    }

    #[test]
    fn cosine_identity_orthogonality() {
        let a = vector(&[(0, 1.0), (2, 2.0)], 4);
        let b = vector(&[(1, 3.0), (3, 1.0)], 4);
        assert!((cosine_similarity(&a, &a) - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&a, &b), 0.0);
    }

    #[test]
    fn cosine_half_overlap() {
        // a = {i1:1, i2:1}, b = {i1:1, i3:1} → 1 / (√2·√2) = 0.5
        let a = vector(&[(1, 1.0), (2, 1.0)], 4);
        let b = vector(&[(1, 1.0), (3, 1.0)], 4);
        assert!((cosine_similarity(&a, &b) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cosine_zero_norm_convention() {
        let zero = FeatureVector::empty(4);
        let a = vector(&[(0, 1.0)], 4);
        assert_eq!(cosine_similarity(&zero, &a), 0.0);
        assert_eq!(cosine_similarity(&zero, &zero), 0.0);
    }

    #[test]
    fn knn_identity_neighbor() {
        let vectors = vec![
            vector(&[(0, 1.0)], 3),
            vector(&[(1, 1.0)], 3),
            vector(&[(2, 1.0)], 3),
        ];
        let model = KnnClassifier::fit(vectors.clone(), vec![0, 1, 2], 1).unwrap();
        for (i, v) in vectors.iter().enumerate() {
            assert_eq!(model.predict(v), i);
        }
    }

    #[test]
    fn knn_majority() {
        let vectors = vec![
            vector(&[(0, 1.0)], 4),
            vector(&[(0, 1.0), (1, 0.2)], 4),
            vector(&[(3, 1.0)], 4),
        ];
        let model = KnnClassifier::fit(vectors, vec![0, 0, 1], 3).unwrap();
        assert_eq!(model.predict(&vector(&[(0, 1.0)], 4)), 0);
    }

    #[test]
    fn knn_count_tie_breaks_by_summed_similarity() {
        // K=2, one neighbor per class; sims 0.9 vs 0.4 → class of the closer one.
        let vectors = vec![
            vector(&[(0, 0.9), (1, (1.0f64 - 0.81).sqrt())], 4),
            vector(&[(0, 0.4), (2, (1.0f64 - 0.16).sqrt())], 4),
        ];
        let model = KnnClassifier::fit(vectors, vec![0, 1], 2).unwrap();
        assert_eq!(model.predict(&vector(&[(0, 1.0)], 4)), 0);
    }

    #[test]
    fn knn_zero_query_falls_to_global_tie_break() {
        let vectors = vec![vector(&[(0, 1.0)], 4), vector(&[(1, 1.0)], 4)];
        let model = KnnClassifier::fit(vectors, vec![1, 0], 2).unwrap();
        // all similarities 0: counts tie, sums tie, lower class id wins
        assert_eq!(model.predict(&FeatureVector::empty(4)), 0);
    }

    fn separable_toy() -> (Vec<FeatureVector>, Vec<usize>) {
        let mut vectors = Vec::new();
        let mut classes = Vec::new();
        for i in 0..10 {
            let bump = 0.1 * i as f64;
            vectors.push(vector(&[(0, 1.0 + bump)], 3));
            classes.push(0);
            vectors.push(vector(&[(1, 1.0 + bump)], 3));
            classes.push(1);
        }
        (vectors, classes)
    }

    #[test]
    fn svm_separates_toy_data() {
        let (vectors, classes) = separable_toy();
        let model = LinearSvm::train(&vectors, &classes, &SvmHyper::default()).unwrap();
        assert_eq!(model.accuracy(&vectors, &classes), 1.0);
        let history = model.objective_history();
        assert!(history.last().unwrap() < history.first().unwrap());
    }

    #[test]
    fn svm_is_deterministic() {
        let (vectors, classes) = separable_toy();
        let hyper = SvmHyper {
            seed: 9,
            ..SvmHyper::default()
        };
        let a = LinearSvm::train(&vectors, &classes, &hyper).unwrap();
        let b = LinearSvm::train(&vectors, &classes, &hyper).unwrap();
        assert_eq!(a.weights(), b.weights());
        assert_eq!(a.biases(), b.biases());
    }

    #[test]
    fn svm_rejects_degenerate_data() {
        assert!(LinearSvm::train(&[], &[], &SvmHyper::default()).is_err());
        let vectors = vec![vector(&[(0, 1.0)], 2), vector(&[(1, 1.0)], 2)];
        let err = LinearSvm::train(&vectors, &[0, 0], &SvmHyper::default()).unwrap_err();
        assert!(err.to_string().contains("constant classifier"), "got: {err}");
    }

    #[test]
    fn svm_zero_query_uses_biases() {
        let (vectors, classes) = separable_toy();
        let model = LinearSvm::train(&vectors, &classes, &SvmHyper::default()).unwrap();
        let scores = model.scores(&FeatureVector::empty(3));
        assert_eq!(scores, model.biases().to_vec());
    }

    #[test]
    fn lp_codebook_round_trip() {
        let vectors = vec![
            vector(&[(0, 1.0)], 4),
            vector(&[(1, 1.0)], 4),
            vector(&[(2, 1.0)], 4),
        ];
        let golds = vec![
            LabelVector::from_pair(0, 0),
            LabelVector::from_pair(1, 0),
            LabelVector::from_pair(2, 1),
        ];
        let labelset = [0usize, 3];
        let model = LpClassifier::train(&vectors, &golds, &labelset, &BaseLearner::Knn { k: 1 })
            .unwrap();
        for gold in &golds {
            let class = model.encode(gold).unwrap();
            let mask = model.decode(class);
            // decode(encode(pattern)) reproduces the projection
            let mut expected = 0u8;
            for (pos, &label) in labelset.iter().enumerate() {
                if gold.get(label) {
                    expected |= 1 << pos;
                }
            }
            assert_eq!(mask, expected);
        }
    }

    #[test]
    fn lp_single_pattern_falls_back_to_constant() {
        let vectors = vec![vector(&[(0, 1.0)], 4), vector(&[(1, 1.0)], 4)];
        let golds = vec![LabelVector::from_pair(0, 0), LabelVector::from_pair(0, 0)];
        let model =
            LpClassifier::train(&vectors, &golds, &[0, 3], &BaseLearner::default()).unwrap();
        assert_eq!(model.patterns().len(), 1);
        let votes = model.predict_votes(&vector(&[(2, 1.0)], 4));
        assert_eq!(votes, vec![(0, true), (3, true)]);
    }

    #[test]
    fn lp_same_group_labelset_never_observes_both_bits() {
        // valid gold vectors set at most one bit within {pp1, pp2}
        let mut vectors = Vec::new();
        let mut golds = Vec::new();
        for (i, (p, q)) in [(0, 0), (1, 1), (2, 2), (0, 1)].iter().enumerate() {
            vectors.push(vector(&[(i, 1.0)], 8));
            golds.push(LabelVector::from_pair(*p, *q));
        }
        let model =
            LpClassifier::train(&vectors, &golds, &[0, 1], &BaseLearner::Knn { k: 1 }).unwrap();
        for &pattern in model.patterns() {
            assert_ne!(pattern, 0b11, "both purpose bits in one pattern");
        }
        assert!(model.patterns().len() <= 3);
    }

    #[test]
    fn lp_vote_decoding_matches_labelset() {
        let vectors = vec![vector(&[(0, 1.0)], 4), vector(&[(1, 1.0)], 4)];
        let golds = vec![LabelVector::from_pair(0, 0), LabelVector::from_pair(1, 1)];
        let model =
            LpClassifier::train(&vectors, &golds, &[0, 3], &BaseLearner::Knn { k: 1 }).unwrap();
        // querying the first training point decodes its own pattern {pp1, pt1}
        let votes = model.predict_votes(&vectors[0]);
        assert_eq!(votes, vec![(0, true), (3, true)]);
        let votes = model.predict_votes(&vectors[1]);
        assert_eq!(votes, vec![(0, false), (3, false)]);
    }

    proptest! {
        /// Cosine similarity is symmetric and within [0,1] for non-negative
        /// vectors.
        #[test]
        fn cosine_symmetry_and_range(
            a in proptest::collection::btree_map(0usize..12, 0.0f64..5.0, 0..8),
            b in proptest::collection::btree_map(0usize..12, 0.0f64..5.0, 0..8),
        ) {
            let va = FeatureVector::from_map(a, 12);
            let vb = FeatureVector::from_map(b, 12);
            let ab = cosine_similarity(&va, &vb);
            let ba = cosine_similarity(&vb, &va);
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        }
    }
}
