//! Two-point MI from unigram and distance-`d` pair histograms.

use serde::{Deserialize, Serialize};

use super::EstimateError;
use crate::entropy::{entropy_grassberger_with, CountTable, GCache};
use crate::ngram::{count_pairs_at_distance, count_unigrams, TokenCorpus};

/// Where the marginal entropies come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginalMode {
    /// `Ĥ(X) = Ĥ(Y)` from the pooled unigram table over all tokens.
    #[default]
    Pooled,
    /// Separate marginals from the first and second coordinates of the pair
    /// table.
    Coordinate,
}

/// `Î = Ĥᴳ(X) + Ĥᴳ(Y) − Ĥᴳ(XY)`. Not clamped: the estimator carries a
/// small positive bias and may dip below zero by noise.
pub fn twopoint_mi_hat(
    unigrams: Option<&CountTable>,
    pairs: &CountTable,
    mode: MarginalMode,
) -> Result<f64, EstimateError> {
    if pairs.is_empty() {
        return Err(EstimateError::EmptyTable);
    }
    let mut cache = GCache::new();
    let joint = entropy_grassberger_with(&mut cache, pairs)?;
    let (hx, hy) = match mode {
        MarginalMode::Pooled => {
            let u = unigrams.ok_or(EstimateError::MissingUnigrams)?;
            if u.is_empty() {
                return Err(EstimateError::EmptyTable);
            }
            let h = entropy_grassberger_with(&mut cache, u)?;
            (h, h)
        }
        MarginalMode::Coordinate => {
            let (a, b) = pairs.coordinate_marginals()?;
            (
                entropy_grassberger_with(&mut cache, &a)?,
                entropy_grassberger_with(&mut cache, &b)?,
            )
        }
    };
    Ok(hx + hy - joint)
}

/// Counts and estimates `Î_d` for every distance. Distances whose pair table
/// comes out empty are skipped with a warning.
pub fn twopoint_scan(
    corpus: &TokenCorpus,
    distances: &[usize],
    mode: MarginalMode,
) -> Result<Vec<(usize, f64)>, EstimateError> {
    let unigrams = count_unigrams(corpus)?;
    let mut out = Vec::with_capacity(distances.len());
    for &d in distances {
        let pairs = count_pairs_at_distance(corpus, d)?;
        if pairs.is_empty() {
            log::warn!("skipping distance {d}: no pairs");
            continue;
        }
        out.push((d, twopoint_mi_hat(Some(&unigrams), &pairs, mode)?));
    }
    Ok(out)
}
