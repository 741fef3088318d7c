//! Scoring scientific manuscripts from transformer hidden states.
//!
//! The pipeline orders papers by reviewer agreement, picks a layer and a set
//! of token vectors from stored hidden states, trains a small MLP on the mean
//! human score and reports rank agreement with held-out reviews.

pub mod corpus;
pub mod evaluator;
pub mod metrics;
pub mod partition;
pub mod reptensor;
pub mod runner;
pub mod stats;

pub use corpus::{Corpus, Criterion, Manuscript, ScoreStats, Section};
pub use evaluator::{Evaluator, EvaluatorConfig, TrainHistory};
pub use metrics::CorrResult;
pub use partition::Split;
pub use reptensor::{FeatureVector, LayerIndex, RepTensor, TokenStrategy};
pub use runner::{ExperimentConfig, GridSettings, LayerSpec, Report};

