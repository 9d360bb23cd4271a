//! Closed-form mutual information from Gaussian log-determinants.

use super::{CovarianceModel, GaussianError, Result, MI_CLAMP};

fn clamp_mi(v: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -MI_CLAMP {
        Ok(0.0)
    } else {
        Err(GaussianError::NegativeMutualInformation(v))
    }
}

impl CovarianceModel {
    /// `I(Z[..ell]; Z[ell..]) = ½(log det Σ_X + log det Σ_Y − log det Σ)`.
    ///
    /// The prefix log-det reuses the model factor; the suffix block is
    /// factored separately.
    pub fn bipartite_mi_exact(&self, ell: usize) -> Result<f64> {
        let len = self.len();
        if ell == 0 || ell >= len {
            return Err(GaussianError::SplitOutOfRange { ell, len });
        }
        let factor = self.cholesky();
        let tail = self.covariance().block(ell..len)?.cholesky()?;
        clamp_mi(0.5 * (factor.logdet_leading(ell) + tail.logdet() - factor.logdet()))
    }

    /// Mutual information between two disjoint sets of positions.
    pub fn block_mi(&self, xs: &[usize], ys: &[usize]) -> Result<f64> {
        if xs.is_empty() || ys.is_empty() || xs.iter().any(|x| ys.contains(x)) {
            return Err(GaussianError::BadIndexSets);
        }
        let len = self.len();
        if let Some(&bad) = xs.iter().chain(ys).find(|&&i| i >= len) {
            return Err(GaussianError::IndexOutOfRange { index: bad, len });
        }
        let cov = self.covariance();
        let joint: Vec<usize> = xs.iter().chain(ys).copied().collect();
        let lx = cov.principal_submatrix(xs)?.cholesky()?.logdet();
        let ly = cov.principal_submatrix(ys)?.cholesky()?.logdet();
        let lxy = cov.principal_submatrix(&joint)?.cholesky()?.logdet();
        clamp_mi(0.5 * (lx + ly - lxy))
    }

    /// `−½ ln(1 − ρ²)` for the correlation between positions `i` and `j`.
    pub fn twopoint_mi_exact(&self, i: usize, j: usize) -> Result<f64> {
        let len = self.len();
        for index in [i, j] {
            if index >= len {
                return Err(GaussianError::IndexOutOfRange { index, len });
            }
        }
        if i == j {
            return Err(GaussianError::SameIndex(i));
        }
        let cov = self.covariance();
        let r = cov.get(i, j) / (cov.get(i, i) * cov.get(j, j)).sqrt();
        clamp_mi(-0.5 * (-r * r).ln_1p())
    }

    /// Two-point MI between the first and last position.
    pub fn antipodal_twopoint_mi(&self) -> Result<f64> {
        self.twopoint_mi_exact(0, self.len() - 1)
    }
}
