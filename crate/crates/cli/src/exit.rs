//! Exit codes: 0 success, 1 computation error, 2 input or validation error.

use miscale::entropy::EntropyError;
use miscale::estimators::EstimateError;
use miscale::fit::FitError;
use miscale::gaussian::GaussianError;
use miscale::linalg::LinalgError;
use miscale::logprob::LogProbError;
use miscale::ngram::NgramError;

pub const COMPUTATION: i32 = 1;
pub const INPUT: i32 = 2;

/// Marks an error as caused by the user's input or flags.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct InputError(pub String);

pub fn input(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

fn gaussian(e: &GaussianError) -> i32 {
    match e {
        GaussianError::NotPositiveDefinite { .. }
        | GaussianError::NegativeMutualInformation(_)
        | GaussianError::Linalg(_) => COMPUTATION,
        _ => INPUT,
    }
}

fn entropy(e: &EntropyError) -> i32 {
    match e {
        EntropyError::NonPositiveArgument(_) | EntropyError::ZeroCount => COMPUTATION,
        _ => INPUT,
    }
}

fn estimate(e: &EstimateError) -> i32 {
    match e {
        EstimateError::Entropy(inner) => entropy(inner),
        _ => INPUT,
    }
}

fn fit(e: &FitError) -> i32 {
    match e {
        FitError::DegenerateSeries => COMPUTATION,
        _ => INPUT,
    }
}

pub fn code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<InputError>()
            || cause.is::<std::io::Error>()
            || cause.is::<serde_json::Error>()
            || cause.is::<NgramError>()
            || cause.is::<LogProbError>()
        {
            return INPUT;
        }
        if cause.is::<LinalgError>() {
            return COMPUTATION;
        }
        if let Some(e) = cause.downcast_ref::<GaussianError>() {
            return gaussian(e);
        }
        if let Some(e) = cause.downcast_ref::<EntropyError>() {
            return entropy(e);
        }
        if let Some(e) = cause.downcast_ref::<EstimateError>() {
            return estimate(e);
        }
        if let Some(e) = cause.downcast_ref::<FitError>() {
            return fit(e);
        }
    }
    COMPUTATION
}
