//! Mutual-information scaling toolkit.
//!
//! The crate is organised around the pipeline that turns sequences into
//! scaling exponents:
//!
//! - [`gaussian`]: hierarchical Gaussian sequence families with exact
//!   bipartite and two-point mutual information, conditional laws and sampling.
//! - [`entropy`]: count tables and digamma-corrected (Grassberger) entropy.
//! - [`ngram`]: token corpora and streaming unigram/pair counting.
//! - [`logprob`]: the JSONL record format for external model log-probabilities,
//!   validation, and derangement manifests.
//! - [`estimators`]: two-point and bipartite MI estimators plus per-position
//!   NLL/KL curves.
//! - [`fit`]: power-law, offset power-law and logarithmic scaling fits.
//!
//! All logarithms are natural; every information quantity is in nats.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod entropy;
pub mod estimators;
pub mod fit;
pub mod gaussian;
pub mod linalg;
pub mod logprob;
pub mod ngram;
pub mod numeric;
