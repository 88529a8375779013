//! Joint classification of tweet purpose (why it was posted) and position
//! (stance toward a topic) as one multi-label problem.
//!
//! The pipeline transforms the two single-label tasks into one six-label
//! task, trains a random k-labelset ensemble of label-powerset classifiers
//! over sparse text features, and repairs predictions that violate the
//! one-purpose/one-position constraint by borrowing labels from the most
//! similar training tweets.
//!
//! The `examples/` directory is the best starting point — one runnable
//! program per capability:
//!
//! ```bash
//! cargo run -p tweetml --example load_and_split
//! cargo run -p tweetml --example tokenize_and_featurize
//! cargo run -p tweetml --example ensemble_votes
//! cargo run -p tweetml --example repair_strategies
//! cargo run -p tweetml --example train_and_predict
//! cargo run -p tweetml --example method_comparison
//! cargo run -p tweetml --example neighbor_sweep
//! ```
//!
//! A thin `tweetml` binary drives the same pipeline from a TOML config with
//! `featurize` / `train` / `evaluate` / `sweep` / `fixtures` subcommands.

pub mod corpus;
mod error;
pub mod eval;
pub mod features;
pub mod fixtures;
pub mod learners;
pub mod postprocess;
pub mod rakel;
mod seeds;
pub mod synth;

pub use corpus::{
    load_dataset, load_dataset_with, save_dataset, Dataset, LabelSpace, LabelVector, LoadOptions,
    Tweet, NUM_LABELS,
};
pub use error::{Error, Result};
pub use features::{
    fallback_pos_tag, tokenize, FeatureConfig, FeatureDescriptor, FeatureKind, FeatureVector,
    Preset, Vocabulary,
};
pub use learners::{
    cosine_similarity, BaseLearner, KnnClassifier, LinearSvm, LpClassifier, SvmHyper,
};
pub use postprocess::{
    find_neighbors, needs_repair, repair_prediction, repair_sum, repair_wsum, Neighbor,
    NeighborSet, PostprocessConfig, RepairEvent, RepairFlags, RepairScope, Strategy,
    TrainingIndex,
};
pub use rakel::{sample_labelsets, EnsembleConfig, EnsembleModel, VoteTally};
pub use seeds::derive_seed;
