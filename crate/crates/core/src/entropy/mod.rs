//! Entropy estimation over count tables.
//!
//! The plug-in estimator `Ĥ = ln N − (1/N) Σ n_m ln n_m` underestimates the
//! entropy of undersampled distributions. The Grassberger estimator replaces
//! `ln n` with
//!
//! ```text
//! G(n) = ψ(n) + ((−1)ⁿ / 2) · (ψ((n+1)/2) − ψ(n/2))
//! ```
//!
//! which removes most of that bias at small counts and tends to `ln n` as
//! counts grow.

mod digamma;
mod table;

pub use digamma::digamma;
pub use table::{pack_pair, unpack_pair, Arity, CountTable, CTB_MAGIC};

use crate::numeric::CompensatedSum;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EntropyError {
    #[error("digamma requires a positive argument, got {0}")]
    NonPositiveArgument(f64),
    #[error("G(n) is undefined for n = 0")]
    ZeroCount,
    #[error("count table is empty")]
    EmptyTable,
    #[error("arity mismatch: expected {expected:?}, got {got:?}")]
    ArityMismatch { expected: Arity, got: Arity },
    #[error("malformed count table: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `G(n)` evaluated directly.
pub fn grassberger_g(n: u64) -> Result<f64, EntropyError> {
    if n == 0 {
        return Err(EntropyError::ZeroCount);
    }
    Ok(g_unchecked(n))
}

fn g_unchecked(n: u64) -> f64 {
    use digamma::digamma_unchecked as psi;
    let x = n as f64;
    let sign = if n.is_multiple_of(2) { 0.5 } else { -0.5 };
    psi(x) + sign * (psi((x + 1.0) / 2.0) - psi(x / 2.0))
}

/// Memoized `G(n)`. Values up to [`GCache::DENSE_LIMIT`] are stored in a
/// growable array; larger arguments are evaluated on demand.
#[derive(Debug, Clone, Default)]
pub struct GCache {
    values: Vec<f64>,
}

impl GCache {
    pub const DENSE_LIMIT: u64 = 1 << 16;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&mut self, n: u64) -> Result<f64, EntropyError> {
        if n == 0 {
            return Err(EntropyError::ZeroCount);
        }
        if n > Self::DENSE_LIMIT {
            return Ok(g_unchecked(n));
        }
        let idx = n as usize;
        if self.values.len() <= idx {
            let start = self.values.len().max(1);
            if self.values.is_empty() {
                self.values.push(f64::NAN);
            }
            self.values
                .extend((start..=idx).map(|k| g_unchecked(k as u64)));
        }
        Ok(self.values[idx])
    }

    pub fn len(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Plug-in entropy `ln N − (1/N) Σ n_m ln n_m`.
pub fn entropy_naive(table: &CountTable) -> Result<f64, EntropyError> {
    if table.is_empty() {
        return Err(EntropyError::EmptyTable);
    }
    let n = table.total() as f64;
    let s: CompensatedSum = table
        .counts()
        .map(|c| {
            let c = c as f64;
            c * c.ln()
        })
        .collect();
    Ok((n.ln() - s.value() / n).max(0.0))
}

/// Grassberger entropy `ln N − (1/N) Σ n_m G(n_m)`.
pub fn entropy_grassberger(table: &CountTable) -> Result<f64, EntropyError> {
    entropy_grassberger_with(&mut GCache::new(), table)
}

pub fn entropy_grassberger_with(cache: &mut GCache, table: &CountTable) -> Result<f64, EntropyError> {
    if table.is_empty() {
        return Err(EntropyError::EmptyTable);
    }
    let n = table.total() as f64;
    let mut s = CompensatedSum::new();
    for c in table.counts() {
        s.add(c as f64 * cache.get(c)?);
    }
    Ok(n.ln() - s.value() / n)
}
