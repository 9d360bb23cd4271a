//! Mutual-information estimators and per-position evaluation metrics.

mod bipartite;
mod metrics;
mod twopoint;

pub use bipartite::{direct_bipartite, vclub_bipartite, BipartiteEstimate, DirectConfig};
pub use metrics::{avg_of, positionwise_kl, positionwise_nll, smooth_curve, MetricCurve, Smoothed};
pub use twopoint::{twopoint_mi_hat, twopoint_scan, MarginalMode};

use thiserror::Error;

use crate::entropy::EntropyError;
use crate::logprob::LogProbError;
use crate::ngram::NgramError;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("count table is empty")]
    EmptyTable,
    #[error("pooled marginal mode needs a unigram table")]
    MissingUnigrams,
    #[error("sample sets differ: {0}")]
    SampleSetMismatch(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("non-finite log-probabilities in {role} records: {offenders:?}")]
    NonFiniteLogProb { role: String, offenders: Vec<String> },
    #[error("shuffled record {0:?} is paired with itself")]
    FixedPointInShuffle(String),
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("leading-pair table has N = {got}, expected one pair per sample ({expected})")]
    LeadingPairsMismatch { expected: u64, got: u64 },
    #[error("leading-pair correction needs a leading-pair table")]
    MissingLeadingPairs,
    #[error("window {window} must be odd and within 1..={len}")]
    BadWindow { window: usize, len: usize },
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Ngram(#[from] NgramError),
}

impl From<LogProbError> for EstimateError {
    fn from(e: LogProbError) -> Self {
        match e {
            LogProbError::InconsistentSplit { sample_id, detail } => {
                EstimateError::LengthMismatch(format!("sample {sample_id:?}: {detail}"))
            }
            other => EstimateError::SampleSetMismatch(other.to_string()),
        }
    }
}
