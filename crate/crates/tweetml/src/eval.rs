//! Evaluation: Hamming loss, single-label baseline combination, the
//! five-method comparison grid and the neighbor-count sensitivity sweep.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, LabelVector, NUM_LABELS};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureVector, Preset, Vocabulary};
use crate::learners::{BaseLearner, KnnClassifier, LinearSvm, SvmHyper};
use crate::postprocess::{
    repair_prediction, PostprocessConfig, RepairEvent, RepairScope, Strategy, TrainingIndex,
};
use crate::rakel::{EnsembleConfig, EnsembleModel};
use crate::seeds::derive_seed;

/// Mean fraction of label bits on which prediction and truth disagree.
pub fn hamming_loss(truth: &[LabelVector], pred: &[LabelVector]) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::InvalidData(format!(
            "hamming loss needs equal lengths, got {} and {}",
            truth.len(),
            pred.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidData("hamming loss over empty lists".into()));
    }
    let total: f64 = truth
        .iter()
        .zip(pred)
        .map(|(t, p)| t.xor_count(p) as f64 / NUM_LABELS as f64)
        .sum();
    Ok(total / truth.len() as f64)
}

/// Combine per-task single-label predictions into label vectors. Inputs are
/// group-local class ids (0..3); the output is always valid.
pub fn combine_baseline(
    purpose_preds: &[usize],
    position_preds: &[usize],
) -> Result<Vec<LabelVector>> {
    if purpose_preds.len() != position_preds.len() {
        return Err(Error::InvalidData(format!(
            "baseline combination needs equal lengths, got {} and {}",
            purpose_preds.len(),
            position_preds.len()
        )));
    }
    purpose_preds
        .iter()
        .zip(position_preds)
        .map(|(&p, &q)| {
            if p >= 3 || q >= 3 {
                return Err(Error::InvalidData(format!(
                    "class id out of range: purpose {p}, position {q}"
                )));
            }
            Ok(LabelVector::from_pair(p, q))
        })
        .collect()
}

/// The five compared methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Knn,
    Svm,
    Rakel,
    RakelSum,
    RakelWsum,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Knn,
        Method::Svm,
        Method::Rakel,
        Method::RakelSum,
        Method::RakelWsum,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Knn => "knn",
            Method::Svm => "svm",
            Method::Rakel => "rakel",
            Method::RakelSum => "rakel_sum",
            Method::RakelWsum => "rakel_wsum",
        }
    }

    fn repair_strategy(&self) -> Option<Strategy> {
        match self {
            Method::RakelSum => Some(Strategy::Sum),
            Method::RakelWsum => Some(Strategy::Wsum),
            _ => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(Method::Knn),
            "svm" => Ok(Method::Svm),
            "rakel" => Ok(Method::Rakel),
            "rakel_sum" | "rakel+sum" => Ok(Method::RakelSum),
            "rakel_wsum" | "rakel+wsum" => Ok(Method::RakelWsum),
            other => Err(Error::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }
}

/// Settings for one comparison run. The master seed fans out per preset and
/// stage; the three ensemble-based methods share one trained ensemble per
/// preset so repair effects are measured on identical predictions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonConfig {
    pub methods: Vec<Method>,
    pub presets: Vec<Preset>,
    pub ensemble: EnsembleConfig,
    pub base: BaseLearner,
    pub postprocess: PostprocessConfig,
    /// Neighbor count for the KNN baseline.
    pub knn_k: usize,
    /// Hyperparameters for the two baseline SVMs.
    pub svm: SvmHyper,
    pub seed: u64,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            methods: Method::ALL.to_vec(),
            presets: Preset::ALL.to_vec(),
            ensemble: EnsembleConfig::default(),
            base: BaseLearner::default(),
            postprocess: PostprocessConfig::default(),
            knn_k: 10,
            svm: SvmHyper::default(),
            seed: 0,
        }
    }
}

/// One grid cell: a method evaluated under a feature preset. `error` carries
/// a failure marker when the cell could not be computed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportCell {
    pub method: Method,
    pub preset: Preset,
    pub hamming_loss: Option<f64>,
    /// Number of test predictions the post-processor repaired.
    pub repaired_count: Option<usize>,
    pub k_neighbors: Option<usize>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Comparison results in the shape of the results grid: methods × presets.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset_id: String,
    pub train_size: usize,
    pub test_size: usize,
    /// Tweets tagged by the rule-based fallback tagger (approximate tags).
    pub pos_fallback_count: usize,
    pub cells: Vec<ReportCell>,
}

impl EvalReport {
    pub fn cell(&self, method: Method, preset: Preset) -> Option<&ReportCell> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.preset == preset)
    }

    /// Render the grid as readable text, one row per method, one column per
    /// preset, plus repair counts and deltas against the unrepaired ensemble
    /// and the KNN baseline.
    pub fn render_table(&self) -> String {
        let mut presets: Vec<Preset> = self.cells.iter().map(|c| c.preset).collect();
        presets.sort();
        presets.dedup();
        let mut methods: Vec<Method> = self.cells.iter().map(|c| c.method).collect();
        methods.sort();
        methods.dedup();

        let mut out = String::new();
        let _ = writeln!(
            out,
            "hamming loss on {} ({} train / {} test)",
            self.dataset_id, self.train_size, self.test_size
        );
        if self.pos_fallback_count > 0 {
            let _ = writeln!(
                out,
                "note: {} tweets tagged by the rule-based fallback tagger (approximate)",
                self.pos_fallback_count
            );
        }
        let _ = write!(out, "{:<12}", "method");
        for p in &presets {
            let _ = write!(out, "{:>10}", p.name());
        }
        out.push('\n');
        for m in &methods {
            let _ = write!(out, "{:<12}", m.name());
            for p in &presets {
                match self.cell(*m, *p) {
                    Some(cell) => match cell.hamming_loss {
                        Some(loss) => {
                            let _ = write!(out, "{loss:>10.4}");
                        }
                        None => {
                            let _ = write!(out, "{:>10}", "FAILED");
                        }
                    },
                    None => {
                        let _ = write!(out, "{:>10}", "-");
                    }
                }
            }
            out.push('\n');
        }

        let repaired: Vec<&ReportCell> = self
            .cells
            .iter()
            .filter(|c| c.repaired_count.is_some())
            .collect();
        if !repaired.is_empty() {
            let _ = writeln!(out, "\nrepaired predictions per cell:");
            for cell in repaired {
                let _ = writeln!(
                    out,
                    "  {:<12}{:<4} repaired {:>4}  (K = {})",
                    cell.method.name(),
                    cell.preset.name(),
                    cell.repaired_count.unwrap(),
                    cell.k_neighbors.unwrap_or(0),
                );
            }
        }

        let deltas = self.delta_lines(&presets);
        if !deltas.is_empty() {
            let _ = writeln!(out, "\nimprovement over baselines (absolute / relative):");
            for line in deltas {
                let _ = writeln!(out, "  {line}");
            }
        }
        out
    }

    fn delta_lines(&self, presets: &[Preset]) -> Vec<String> {
        let mut lines = Vec::new();
        for &p in presets {
            for (better, base) in [
                (Method::RakelSum, Method::Rakel),
                (Method::RakelWsum, Method::Rakel),
                (Method::RakelWsum, Method::Knn),
            ] {
                if let (Some(a), Some(b)) = (
                    self.cell(better, p).and_then(|c| c.hamming_loss),
                    self.cell(base, p).and_then(|c| c.hamming_loss),
                ) {
                    if b > 0.0 {
                        lines.push(format!(
                            "{:<4} {} vs {}: {:+.4} / {:+.2}%",
                            p.name(),
                            better.name(),
                            base.name(),
                            a - b,
                            (b - a) / b * 100.0
                        ));
                    }
                }
            }
        }
        lines
    }
}

/// Repair audit for one grid cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellAudit {
    pub method: Method,
    pub preset: Preset,
    pub events: Vec<RepairEvent>,
}

/// A comparison run's full output: the report grid plus per-cell repair
/// audits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonOutcome {
    pub report: EvalReport,
    pub audits: Vec<CellAudit>,
}

/// Train and score every configured method under every configured preset.
/// Per-cell failures are recorded as markers instead of aborting the grid.
pub fn run_comparison(
    train: &Dataset,
    test: &Dataset,
    config: &ComparisonConfig,
) -> Result<ComparisonOutcome> {
    if !train.is_fully_labeled() || !test.is_fully_labeled() {
        return Err(Error::InvalidData(
            "comparison requires fully labeled train and test sets".into(),
        ));
    }
    if config.methods.is_empty() || config.presets.is_empty() {
        return Err(Error::InvalidConfig(
            "comparison needs at least one method and one preset".into(),
        ));
    }
    config.postprocess.validate()?;
    if config.knn_k == 0 {
        return Err(Error::InvalidConfig("baseline knn K must be >= 1".into()));
    }

    let test_golds = test.gold_labels()?;
    let pos_fallback_count = train
        .iter()
        .chain(test.iter())
        .filter(|t| t.pos_tags.is_none())
        .count();

    let mut cells = Vec::new();
    let mut audits = Vec::new();

    for &preset in &config.presets {
        let preset_seed = derive_seed(config.seed, &format!("preset-{}", preset.name()));
        match preset_cells(train, test, &test_golds, preset, preset_seed, config) {
            Ok((mut preset_cells, mut preset_audits)) => {
                cells.append(&mut preset_cells);
                audits.append(&mut preset_audits);
            }
            Err(e) => {
                // flush failure markers for every requested cell of the preset
                for &method in &config.methods {
                    cells.push(ReportCell {
                        method,
                        preset,
                        hamming_loss: None,
                        repaired_count: None,
                        k_neighbors: None,
                        seed: preset_seed,
                        error: Some(e.to_string()),
                    });
                }
            }
        }
    }

    Ok(ComparisonOutcome {
        report: EvalReport {
            dataset_id: format!("{} tweets", train.len() + test.len()),
            train_size: train.len(),
            test_size: test.len(),
            pos_fallback_count,
            cells,
        },
        audits,
    })
}

fn preset_cells(
    train: &Dataset,
    test: &Dataset,
    test_golds: &[LabelVector],
    preset: Preset,
    preset_seed: u64,
    config: &ComparisonConfig,
) -> Result<(Vec<ReportCell>, Vec<CellAudit>)> {
    let vocab = Vocabulary::build(train, &FeatureConfig::preset(preset))?;
    let train_vectors = vocab.featurize_all(train);
    let test_vectors = vocab.featurize_all(test);
    let train_golds = train.gold_labels()?;

    let wants_ensemble = config
        .methods
        .iter()
        .any(|m| matches!(m, Method::Rakel | Method::RakelSum | Method::RakelWsum));
    let ensemble_artifacts = if wants_ensemble {
        let ens_config = EnsembleConfig {
            seed: derive_seed(preset_seed, "ensemble"),
            ..config.ensemble
        };
        let model = EnsembleModel::train_on_vectors(
            &train_vectors,
            &train_golds,
            vocab.hash(),
            &ens_config,
            &config.base,
        )?;
        let raw: Vec<LabelVector> = test_vectors.iter().map(|v| model.predict(v)).collect();
        let index = TrainingIndex::new(train_vectors.clone(), train_golds.clone())?;
        Some((raw, index))
    } else {
        None
    };

    let mut cells = Vec::new();
    let mut audits = Vec::new();
    for &method in &config.methods {
        let outcome = score_method(
            method,
            train,
            test,
            test_golds,
            &train_vectors,
            &test_vectors,
            &train_golds,
            ensemble_artifacts.as_ref(),
            preset_seed,
            config,
        );
        match outcome {
            Ok((loss, repaired, events)) => {
                let is_repairing = method.repair_strategy().is_some();
                cells.push(ReportCell {
                    method,
                    preset,
                    hamming_loss: Some(loss),
                    repaired_count: if is_repairing { Some(repaired) } else { None },
                    k_neighbors: if is_repairing {
                        Some(config.postprocess.k)
                    } else if method == Method::Knn {
                        Some(config.knn_k)
                    } else {
                        None
                    },
                    seed: preset_seed,
                    error: None,
                });
                if is_repairing {
                    audits.push(CellAudit {
                        method,
                        preset,
                        events,
                    });
                }
            }
            Err(e) => cells.push(ReportCell {
                method,
                preset,
                hamming_loss: None,
                repaired_count: None,
                k_neighbors: None,
                seed: preset_seed,
                error: Some(e.to_string()),
            }),
        }
    }
    Ok((cells, audits))
}

#[allow(clippy::too_many_arguments)]
fn score_method(
    method: Method,
    train: &Dataset,
    test: &Dataset,
    test_golds: &[LabelVector],
    train_vectors: &[FeatureVector],
    test_vectors: &[FeatureVector],
    train_golds: &[LabelVector],
    ensemble: Option<&(Vec<LabelVector>, TrainingIndex)>,
    preset_seed: u64,
    config: &ComparisonConfig,
) -> Result<(f64, usize, Vec<RepairEvent>)> {
    let _ = train;
    match method {
        Method::Knn => {
            let preds = baseline_knn(train_vectors, train_golds, test_vectors, config.knn_k)?;
            Ok((hamming_loss(test_golds, &preds)?, 0, Vec::new()))
        }
        Method::Svm => {
            let preds = baseline_svm(
                train_vectors,
                train_golds,
                test_vectors,
                &config.svm,
                preset_seed,
            )?;
            Ok((hamming_loss(test_golds, &preds)?, 0, Vec::new()))
        }
        Method::Rakel => {
            let (raw, _) = ensemble.expect("ensemble trained for rakel methods");
            Ok((hamming_loss(test_golds, raw)?, 0, Vec::new()))
        }
        Method::RakelSum | Method::RakelWsum => {
            let (raw, index) = ensemble.expect("ensemble trained for rakel methods");
            let pp = PostprocessConfig {
                strategy: method.repair_strategy().unwrap(),
                ..config.postprocess
            };
            let mut repaired = Vec::with_capacity(raw.len());
            let mut events = Vec::new();
            for ((pred, query), tweet) in raw.iter().zip(test_vectors).zip(test.iter()) {
                let (fixed, event) = repair_prediction(pred, query, index, &pp, &tweet.id);
                repaired.push(fixed);
                if let Some(event) = event {
                    events.push(event);
                }
            }
            let count = events.len();
            Ok((hamming_loss(test_golds, &repaired)?, count, events))
        }
    }
}

/// Two independent KNN classifiers (purpose, position), combined.
fn baseline_knn(
    train_vectors: &[FeatureVector],
    train_golds: &[LabelVector],
    test_vectors: &[FeatureVector],
    k: usize,
) -> Result<Vec<LabelVector>> {
    let purpose_classes: Vec<usize> = train_golds
        .iter()
        .map(|g| g.purpose_class().expect("gold labels are valid"))
        .collect();
    let position_classes: Vec<usize> = train_golds
        .iter()
        .map(|g| g.position_class().expect("gold labels are valid"))
        .collect();
    let purpose = KnnClassifier::fit(train_vectors.to_vec(), purpose_classes, k)?;
    let position = KnnClassifier::fit(train_vectors.to_vec(), position_classes, k)?;
    let p: Vec<usize> = test_vectors.iter().map(|v| purpose.predict(v)).collect();
    let q: Vec<usize> = test_vectors.iter().map(|v| position.predict(v)).collect();
    combine_baseline(&p, &q)
}

/// Two independent one-vs-rest SVMs (purpose, position), combined.
fn baseline_svm(
    train_vectors: &[FeatureVector],
    train_golds: &[LabelVector],
    test_vectors: &[FeatureVector],
    hyper: &SvmHyper,
    preset_seed: u64,
) -> Result<Vec<LabelVector>> {
    let purpose_classes: Vec<usize> = train_golds
        .iter()
        .map(|g| g.purpose_class().expect("gold labels are valid"))
        .collect();
    let position_classes: Vec<usize> = train_golds
        .iter()
        .map(|g| g.position_class().expect("gold labels are valid"))
        .collect();
    let purpose = LinearSvm::train(
        train_vectors,
        &purpose_classes,
        &SvmHyper {
            seed: derive_seed(preset_seed, "svm-purpose"),
            ..*hyper
        },
    )?;
    let position = LinearSvm::train(
        train_vectors,
        &position_classes,
        &SvmHyper {
            seed: derive_seed(preset_seed, "svm-position"),
            ..*hyper
        },
    )?;
    let p: Vec<usize> = test_vectors.iter().map(|v| purpose.predict(v)).collect();
    let q: Vec<usize> = test_vectors.iter().map(|v| position.predict(v)).collect();
    combine_baseline(&p, &q)
}

/// Sweep the post-processing neighbor count over an already trained
/// ensemble: the predictions are fixed, only the repair varies with K.
pub fn sweep_prepared(
    raw_preds: &[LabelVector],
    test_vectors: &[FeatureVector],
    test_golds: &[LabelVector],
    test_ids: &[String],
    index: &TrainingIndex,
    strategy: Strategy,
    scope: RepairScope,
    k_values: &[usize],
) -> Result<Vec<(usize, f64)>> {
    if k_values.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one K value".into()));
    }
    if strategy == Strategy::None {
        return Err(Error::InvalidConfig(
            "sweep strategy must be sum or wsum".into(),
        ));
    }
    let mut series = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let pp = PostprocessConfig {
            strategy,
            k,
            scope,
        };
        let mut repaired = Vec::with_capacity(raw_preds.len());
        for ((pred, query), id) in raw_preds.iter().zip(test_vectors).zip(test_ids) {
            let (fixed, _) = repair_prediction(pred, query, index, &pp, id);
            repaired.push(fixed);
        }
        series.push((k, hamming_loss(test_golds, &repaired)?));
    }
    Ok(series)
}

/// Train once, then sweep the neighbor count K for one repair strategy.
#[allow(clippy::too_many_arguments)]
pub fn sweep_k(
    train: &Dataset,
    test: &Dataset,
    preset: Preset,
    strategy: Strategy,
    k_values: &[usize],
    ensemble: &EnsembleConfig,
    base: &BaseLearner,
    scope: RepairScope,
) -> Result<Vec<(usize, f64)>> {
    let vocab = Vocabulary::build(train, &FeatureConfig::preset(preset))?;
    let model = EnsembleModel::train(train, &vocab, ensemble, base)?;
    let test_vectors = vocab.featurize_all(test);
    let raw: Vec<LabelVector> = test_vectors.iter().map(|v| model.predict(v)).collect();
    let index = TrainingIndex::from_dataset(train, &vocab)?;
    let test_ids: Vec<String> = test.iter().map(|t| t.id.clone()).collect();
    sweep_prepared(
        &raw,
        &test_vectors,
        test.gold_labels()?.as_slice(),
        &test_ids,
        &index,
        strategy,
        scope,
        k_values,
    )
}

/// The default sweep grid: K = 2..=30 step 2, fifteen points.
pub fn default_sweep_k_values() -> Vec<usize> {
    (1..=15).map(|i| i * 2).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hamming_loss_basics() {
        let a = vec![LabelVector::from_pair(0, 0), LabelVector::from_pair(1, 2)];
        assert_eq!(hamming_loss(&a, &a).unwrap(), 0.0);

        // one instance, two differing bits → 2/6
        let truth = vec![LabelVector::from_pair(0, 0)];
        let pred = vec![LabelVector::from_pair(1, 0)];
        assert!((hamming_loss(&truth, &pred).unwrap() - 2.0 / 6.0).abs() < 1e-12);

        // complements on every instance → 1.0
        let comp: Vec<LabelVector> = a.iter().map(|v| v.complement()).collect();
        assert_eq!(hamming_loss(&a, &comp).unwrap(), 1.0);
    }

    #[test]
    fn hamming_loss_rejects_mismatch_and_empty() {
        let a = vec![LabelVector::from_pair(0, 0)];
        assert!(hamming_loss(&a, &[]).is_err());
        assert!(hamming_loss(&[], &[]).is_err());
    }

    #[test]
    fn combine_baseline_mapping() {
        let space = crate::corpus::LabelSpace::standard();
        let p = space.purpose_index("information_sharing").unwrap();
        let q = space.position_index("pro").unwrap();
        let combined = combine_baseline(&[p], &[q]).unwrap();
        assert_eq!(combined[0].to_string(), "010|100");
        assert!(combined.iter().all(|v| v.is_valid()));
    }

    #[test]
    fn combine_baseline_rejects_bad_input() {
        assert!(combine_baseline(&[0, 1, 2], &[0, 1, 2, 0]).is_err());
        assert!(combine_baseline(&[3], &[0]).is_err());
    }

    #[test]
    fn default_sweep_grid_shape() {
        let ks = default_sweep_k_values();
        assert_eq!(ks.len(), 15);
        assert_eq!(ks.first(), Some(&2));
        assert_eq!(ks.last(), Some(&30));
        assert!(ks.windows(2).all(|w| w[1] - w[0] == 2));
    }

    proptest! {
        /// Hamming loss equals the mean per-bit disagreement rate.
        #[test]
        fn matches_bit_counting_oracle(pairs in proptest::collection::vec((0u8..64, 0u8..64), 1..40)) {
            let truth: Vec<LabelVector> = pairs
                .iter()
                .map(|&(t, _)| mask_to_vector(t))
                .collect();
            let pred: Vec<LabelVector> = pairs
                .iter()
                .map(|&(_, p)| mask_to_vector(p))
                .collect();
            let loss = hamming_loss(&truth, &pred).unwrap();
            let mut disagreements = 0usize;
            for (t, p) in truth.iter().zip(&pred) {
                for j in 0..NUM_LABELS {
                    if t.get(j) != p.get(j) {
                        disagreements += 1;
                    }
                }
            }
            let oracle = disagreements as f64 / (NUM_LABELS * pairs.len()) as f64;
            prop_assert!((loss - oracle).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&loss));
        }

        /// Valid-vs-valid instances quantize per-instance loss to {0, 2, 4}
        /// differing bits, so a combined baseline's per-instance loss is in
        /// {0, 1/3, 2/3}.
        #[test]
        fn baseline_loss_quantization(p1 in 0usize..3, q1 in 0usize..3, p2 in 0usize..3, q2 in 0usize..3) {
            let truth = vec![LabelVector::from_pair(p1, q1)];
            let pred = combine_baseline(&[p2], &[q2]).unwrap();
            let loss = hamming_loss(&truth, &pred).unwrap();
            let quantized = [0.0, 1.0 / 3.0, 2.0 / 3.0];
            prop_assert!(quantized.iter().any(|&v| (loss - v).abs() < 1e-12));
        }
    }

    fn mask_to_vector(mask: u8) -> LabelVector {
        let mut bits = [false; NUM_LABELS];
        for (i, bit) in bits.iter_mut().enumerate() {
            *bit = mask >> i & 1 == 1;
        }
        LabelVector::from_bits(bits)
    }
}
