//! Consistency-ordered train/test splits.
//!
//! Papers whose reviewers agree (low score variance) go to training; the
//! contested remainder is held out for testing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Criterion, Manuscript};
use crate::stats::{self, StdConvention};

#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("unknown criterion \"{0}\"")]
    UnknownCriterion(String),
    #[error("train ratio {0} outside (0, 1)")]
    RatioOutOfRange(f64),
    #[error("cannot split an empty id list")]
    Empty,
    #[error("{n} papers at ratio {ratio} leave no test papers")]
    AllTrain { n: usize, ratio: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub criterion: Criterion,
    #[serde(rename = "ratio")]
    pub train_ratio: f64,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Population variance of a paper's scores for `criterion`.
pub fn review_variance(m: &Manuscript, criterion: &Criterion) -> Option<f64> {
    m.scores(criterion)
        .map(|s| stats::variance(s, StdConvention::Population))
}

/// Eligible ids ordered by ascending review variance, ties by ascending id.
pub fn sort_by_consistency(
    corpus: &Corpus,
    criterion: &Criterion,
) -> Result<Vec<String>, PartitionError> {
    let mut keyed: Vec<(f64, &str)> = corpus
        .iter()
        .filter_map(|m| review_variance(m, criterion).map(|v| (v, m.id.as_str())))
        .collect();
    if keyed.is_empty() {
        return Err(PartitionError::UnknownCriterion(criterion.to_string()));
    }
    let dropped = corpus.len() - keyed.len();
    if dropped > 0 {
        log::info!("{dropped} manuscripts lack criterion {criterion} and are excluded");
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    Ok(keyed.into_iter().map(|(_, id)| id.to_string()).collect())
}

/// Number of training papers for `n` eligible papers.
pub fn train_size(n: usize, train_ratio: f64) -> usize {
    ((train_ratio * n as f64).floor() as usize).max(1)
}

pub fn split(
    ordered_ids: &[String],
    train_ratio: f64,
    criterion: &Criterion,
) -> Result<Split, PartitionError> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(PartitionError::RatioOutOfRange(train_ratio));
    }
    if ordered_ids.is_empty() {
        return Err(PartitionError::Empty);
    }
    let n = ordered_ids.len();
    let k = train_size(n, train_ratio);
    if k >= n {
        return Err(PartitionError::AllTrain {
            n,
            ratio: train_ratio,
        });
    }
    Ok(Split {
        criterion: criterion.clone(),
        train_ratio,
        train_ids: ordered_ids[..k].to_vec(),
        test_ids: ordered_ids[k..].to_vec(),
    })
}

/// Sorts by consistency and splits in one step.
pub fn consistency_split(
    corpus: &Corpus,
    criterion: &Criterion,
    train_ratio: f64,
) -> Result<Split, PartitionError> {
    let ordered = sort_by_consistency(corpus, criterion)?;
    split(&ordered, train_ratio, criterion)
}

/// Ground-truth label: the mean human score.
pub fn mean_label(m: &Manuscript, criterion: &Criterion) -> Result<f64, PartitionError> {
    m.scores(criterion)
        .filter(|s| !s.is_empty())
        .map(stats::mean)
        .ok_or_else(|| PartitionError::UnknownCriterion(criterion.to_string()))
}
