//! Toolkit for sharpening token-level contextual embeddings with
//! lexicon-supervised contrastive learning, and for evaluating the result on
//! unsupervised word-in-context classification and two-step semantic frame
//! induction.
//!
//! The pieces compose as a pipeline:
//!
//! 1. [`lexicon`] — parse sense-annotated example sentences, filter them,
//!    split them by lemma, and derive word-in-context pair sets.
//! 2. [`encoder`] — an abstraction over a contextual encoder that maps a
//!    sentence to per-subtoken vectors at every layer and extracts
//!    target-token embeddings (with subword averaging and optional masking).
//!    [`toy`] ships a deterministic, trainable reference implementation.
//! 3. [`trainer`] — per-lemma batches and the multiple-positive contrastive
//!    loss used to fine-tune the encoder.
//! 4. [`postprocess`] — PCA with optional whitening, plus the cosine
//!    similarity primitive.
//! 5. [`wic`] — similarity-threshold word-in-context classification with
//!    dev-set threshold tuning and McNemar significance testing.
//! 6. [`clustering`] / [`frames`] — X-means and group-average agglomerative
//!    clustering, composed into per-lemma then cross-lemma frame induction.
//! 7. [`metrics`] — purity, inverse purity, and B-cubed scores against gold
//!    classes.
//! 8. [`grid`] — hyperparameter grids, seeded multi-run aggregation, and
//!    report tables.

pub mod clustering;
pub mod dump;
pub mod encoder;
pub mod error;
pub mod frames;
pub mod grid;
pub mod lexicon;
pub mod metrics;
pub mod postprocess;
pub mod synth;
pub mod toy;
pub mod trainer;
pub mod wic;

mod hashing;
mod vecmath;

pub use clustering::{ClusteringResult, agglomerative_cluster, kmeans, xmeans_cluster};
pub use encoder::{Encoder, TokenVector, TrainableEncoder, combine_masked, target_embedding};
pub use error::{Error, Result};
pub use frames::{FrameConfig, FrameInstance, InductionOutcome, Step1Algo, induce};
pub use lexicon::{
    DatasetStats, FilterPolicy, LexiconDataset, SenseExample, Span, SplitBundle, WiCPair,
    build_wic_pairs, dataset_stats, filter_dataset, parse_lexicon, split_by_lemma,
};
pub use metrics::{BcubedScores, LabeledPartition, PurityScores, bcubed_scores, purity_scores};
pub use postprocess::{Projection, cosine, fit_projection};
pub use toy::ToyEncoder;
pub use trainer::{LemmaBatch, Similarity, TrainConfig, TrainLog, batch_loss, build_batches, train};
pub use wic::{ScoredPair, ThresholdModel, evaluate_accuracy, mcnemar_test, tune_threshold};
