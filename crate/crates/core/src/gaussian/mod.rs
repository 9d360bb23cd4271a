//! Hierarchical multivariate-Gaussian sequence families with exact
//! mutual-information ground truth.
//!
//! Both families start from four independent unit Gaussians mixed by the
//! orthogonal-row matrix
//!
//! ```text
//!  γ   γ   γ  ρ
//! -γ   γ  -γ  ρ
//! -γ  -γ   γ  ρ
//!  γ  -γ  -γ  ρ
//! ```
//!
//! Every further layer arranges variables into rows of four, mixes each row
//! with the same matrix, flattens row-major and then sets the covariance of
//! each row-boundary pair `(Z[i,4], Z[i+1,1])` to
//! `2/5 (cov(Z[i,3], Z[i,4]) + cov(Z[i+1,1], Z[i+1,2])) + 1/5`.
//!
//! * [`Family::Subvolume`]: each row holds three independent copies of the
//!   previous layer plus one fresh variable. Bipartite MI grows as a power law.
//! * [`Family::Logfamily`]: each row holds one copy of the previous layer plus
//!   three fresh variables. Bipartite MI grows logarithmically.
//!
//! The covariance is maintained analytically: a layer with previous
//! covariance `C` becomes `C ⊗ P + I ⊗ Q` where `P` and `Q` split `𝓜𝓜ᵀ`
//! according to which columns carry copies of the previous layer.
//!
//! Positions are 0-based throughout the library; `ell` is a prefix length.

mod conditional;
mod exact;
mod format;

pub use conditional::{gaussian_kl, ConditionalLaw};
pub use format::{read_gcov, write_gcov, GCOV_MAGIC, GCOV_VERSION};

use crate::linalg::{Cholesky, LinalgError, SymmetricMatrix};
use thiserror::Error;

/// Default mixing weight for the three shared columns.
pub const DEFAULT_GAMMA: f64 = 0.559_016_994_374_947_4; // sqrt(5)/4
/// Default mixing weight for the fresh column.
pub const DEFAULT_RHO: f64 = 0.25;
/// Largest number of layers built unless the caller raises it (L = 16384).
pub const DEFAULT_LAYER_CAP: u32 = 7;

const UNIT_VARIANCE_TOL: f64 = 1e-9;
const DIAGONAL_TOL: f64 = 1e-12;
/// Negative MI values within this window are rounding and clamp to zero.
pub const MI_CLAMP: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GaussianError {
    #[error("layers must be at least 1")]
    ZeroLayers,
    #[error("{layers} layers exceeds the cap of {cap} (raise the cap explicitly)")]
    LayerCapExceeded { layers: u32, cap: u32 },
    #[error("3·gamma² + rho² = {value} is not 1 (gamma={gamma}, rho={rho})")]
    NotUnitVariance { gamma: f64, rho: f64, value: f64 },
    #[error("covariance is not positive definite at layer {layer}: {source}")]
    NotPositiveDefinite {
        layer: u32,
        #[source]
        source: LinalgError,
    },
    #[error("diagonal entry {index} is {value}, expected 1")]
    NonUnitDiagonal { index: usize, value: f64 },
    #[error("split {ell} out of range 1..{len}")]
    SplitOutOfRange { ell: usize, len: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("two-point MI needs distinct positions, got {0} twice")]
    SameIndex(usize),
    #[error("prefix has length {got}, expected {expected}")]
    PrefixLengthMismatch { expected: usize, got: usize },
    #[error("standard deviation at position {position} is {std}, must be > 0")]
    NonPositiveStd { position: usize, std: f64 },
    #[error("mutual information evaluated to {0}, below the rounding window")]
    NegativeMutualInformation(f64),
    #[error("sample count must be at least {min}, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("index sets overlap or are empty")]
    BadIndexSets,
    #[error("model has no hierarchy parameters and cannot be serialized")]
    NotHierarchical,
    #[error("malformed covariance file: {0}")]
    Format(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GaussianError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Subvolume,
    Logfamily,
}

impl Family {
    pub fn code(self) -> u8 {
        match self {
            Family::Subvolume => 0,
            Family::Logfamily => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Family::Subvolume),
            1 => Some(Family::Logfamily),
            _ => None,
        }
    }
}

impl std::str::FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "subvolume" => Ok(Family::Subvolume),
            "logfamily" => Ok(Family::Logfamily),
            other => Err(format!("unknown family {other:?} (subvolume|logfamily)")),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Subvolume => "subvolume",
            Family::Logfamily => "logfamily",
        })
    }
}

/// Construction parameters of a hierarchical model.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Hierarchy {
    pub family: Family,
    pub layers: u32,
    pub gamma: f64,
    pub rho: f64,
}

impl Hierarchy {
    pub fn new(family: Family, layers: u32) -> Self {
        Self {
            family,
            layers,
            gamma: DEFAULT_GAMMA,
            rho: DEFAULT_RHO,
        }
    }

    pub fn len(&self) -> usize {
        4usize.pow(self.layers)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn build(&self) -> Result<CovarianceModel> {
        build_covariance(self.family, self.layers, self.gamma, self.rho, DEFAULT_LAYER_CAP)
    }

    pub fn build_with_cap(&self, cap: u32) -> Result<CovarianceModel> {
        build_covariance(self.family, self.layers, self.gamma, self.rho, cap)
    }
}

/// Zero-mean Gaussian over a sequence, held as a dense covariance together
/// with its Cholesky factor. Immutable after construction.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    hierarchy: Option<Hierarchy>,
    cov: SymmetricMatrix,
    factor: Cholesky,
}

impl CovarianceModel {
    /// Wraps an arbitrary covariance. Fails unless positive definite.
    pub fn from_covariance(cov: SymmetricMatrix) -> Result<Self> {
        let factor = cov
            .cholesky()
            .map_err(|source| GaussianError::NotPositiveDefinite { layer: 0, source })?;
        Ok(Self {
            hierarchy: None,
            cov,
            factor,
        })
    }

    pub(crate) fn from_parts(hierarchy: Hierarchy, cov: SymmetricMatrix) -> Result<Self> {
        check_unit_diagonal(&cov)?;
        let factor = cov.cholesky().map_err(|source| GaussianError::NotPositiveDefinite {
            layer: hierarchy.layers,
            source,
        })?;
        Ok(Self {
            hierarchy: Some(hierarchy),
            cov,
            factor,
        })
    }

    pub fn hierarchy(&self) -> Option<&Hierarchy> {
        self.hierarchy.as_ref()
    }

    pub fn len(&self) -> usize {
        self.cov.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.cov.dim() == 0
    }

    pub fn covariance(&self) -> &SymmetricMatrix {
        &self.cov
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.factor
    }
}

fn mixing_matrix(gamma: f64, rho: f64) -> [[f64; 4]; 4] {
    [
        [gamma, gamma, gamma, rho],
        [-gamma, gamma, -gamma, rho],
        [-gamma, -gamma, gamma, rho],
        [gamma, -gamma, -gamma, rho],
    ]
}

/// Splits `𝓜 𝓜ᵀ` into the part fed by previous-layer copies (`shared`) and
/// the part fed by fresh independent variables (`fresh`).
fn split_gram(family: Family, m: &[[f64; 4]; 4]) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
    let shared_cols: &[usize] = match family {
        Family::Subvolume => &[0, 1, 2],
        Family::Logfamily => &[0],
    };
    let mut shared = [[0.0; 4]; 4];
    let mut fresh = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                let v = m[a][c] * m[b][c];
                if shared_cols.contains(&c) {
                    shared[a][b] += v;
                } else {
                    fresh[a][b] += v;
                }
            }
        }
    }
    (shared, fresh)
}

fn check_unit_diagonal(cov: &SymmetricMatrix) -> Result<()> {
    for i in 0..cov.dim() {
        let v = cov.get(i, i);
        if (v - 1.0).abs() >= DIAGONAL_TOL {
            return Err(GaussianError::NonUnitDiagonal { index: i, value: v });
        }
    }
    Ok(())
}

/// Builds the covariance of the flattened layer-`layers` output.
///
/// Every intermediate layer is validated with a full Cholesky factorization;
/// the final factor is kept on the model.
pub fn build_covariance(
    family: Family,
    layers: u32,
    gamma: f64,
    rho: f64,
    cap: u32,
) -> Result<CovarianceModel> {
    if layers == 0 {
        return Err(GaussianError::ZeroLayers);
    }
    if layers > cap {
        return Err(GaussianError::LayerCapExceeded { layers, cap });
    }
    let unit = 3.0 * gamma * gamma + rho * rho;
    if (unit - 1.0).abs() > UNIT_VARIANCE_TOL {
        return Err(GaussianError::NotUnitVariance {
            gamma,
            rho,
            value: unit,
        });
    }
    let m = mixing_matrix(gamma, rho);
    let (shared, fresh) = split_gram(family, &m);

    let mut prev = SymmetricMatrix::identity(1);
    for layer in 1..=layers {
        let rows = prev.dim();
        let mut next = SymmetricMatrix::from_fn(4 * rows, |r, s| {
            let (i, a) = (r / 4, r % 4);
            let (k, b) = (s / 4, s % 4);
            let mut v = prev.get(i, k) * shared[a][b];
            if i == k {
                v += fresh[a][b];
            }
            v
        });
        // Row-boundary adjustment. Only cross-row entries are written and
        // only within-row entries are read, so the order does not matter.
        for i in 0..rows.saturating_sub(1) {
            let left = next.get(4 * i + 2, 4 * i + 3);
            let right = next.get(4 * i + 4, 4 * i + 5);
            next.set(4 * i + 3, 4 * i + 4, 0.4 * (left + right) + 0.2);
        }
        if layer < layers {
            check_unit_diagonal(&next)?;
            next.cholesky()
                .map_err(|source| GaussianError::NotPositiveDefinite { layer, source })?;
        }
        prev = next;
    }
    CovarianceModel::from_parts(
        Hierarchy {
            family,
            layers,
            gamma,
            rho,
        },
        prev,
    )
}
