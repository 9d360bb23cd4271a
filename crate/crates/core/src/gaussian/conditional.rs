//! Autoregressive conditional laws, sampling, Monte-Carlo MI and Gaussian KL.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{CovarianceModel, GaussianError, Result};
use crate::linalg::{dot, Cholesky};
use crate::numeric::mean_and_stderr;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Law of position `position` given every earlier position.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ConditionalLaw {
    pub position: usize,
    pub mean: f64,
    pub std: f64,
}

impl ConditionalLaw {
    pub fn log_density(&self, x: f64) -> f64 {
        let u = (x - self.mean) / self.std;
        -0.5 * u * u - self.std.ln() - HALF_LN_2PI
    }

    /// Differential entropy `½ ln(2πe σ²)`.
    pub fn entropy(&self) -> f64 {
        0.5 + HALF_LN_2PI + self.std.ln()
    }
}

/// `KL(N(μp, σp²) ‖ N(μq, σq²))`.
pub fn gaussian_kl(p_mean: f64, p_std: f64, q_mean: f64, q_std: f64) -> f64 {
    let d = q_mean - p_mean;
    (q_std / p_std).ln() + (p_std * p_std + d * d) / (2.0 * q_std * q_std) - 0.5
}

/// Conditional laws at every position of `seq` given its own prefix.
/// `F` row `i` gives mean `F[i,..i]·e[..i]` and std `F[i,i]`, where `e`
/// solves `F e = seq`.
fn laws_from_factor(factor: &Cholesky, seq: &[f64]) -> Result<Vec<ConditionalLaw>> {
    let e = factor.forward_solve(seq)?;
    Ok((0..seq.len())
        .map(|i| {
            let r = factor.row(i);
            ConditionalLaw {
                position: i,
                mean: dot(&r[..i], &e[..i]),
                std: r[i],
            }
        })
        .collect())
}

fn log_densities(factor: &Cholesky, seq: &[f64]) -> Result<Vec<f64>> {
    let laws = laws_from_factor(factor, seq)?;
    Ok(laws
        .iter()
        .zip(seq)
        .map(|(law, &x)| law.log_density(x))
        .collect())
}

impl CovarianceModel {
    /// Law of `Z[position]` given `Z[..position] = prefix`.
    pub fn conditional_law(&self, position: usize, prefix: &[f64]) -> Result<ConditionalLaw> {
        let len = self.len();
        if position >= len {
            return Err(GaussianError::IndexOutOfRange {
                index: position,
                len,
            });
        }
        if prefix.len() != position {
            return Err(GaussianError::PrefixLengthMismatch {
                expected: position,
                got: prefix.len(),
            });
        }
        let factor = self.cholesky();
        let e = factor.forward_solve(prefix)?;
        let r = factor.row(position);
        Ok(ConditionalLaw {
            position,
            mean: dot(&r[..position], &e),
            std: r[position],
        })
    }

    /// Conditional laws at positions `0..seq.len()` in one forward pass.
    pub fn conditional_laws(&self, seq: &[f64]) -> Result<Vec<ConditionalLaw>> {
        if seq.len() > self.len() {
            return Err(GaussianError::PrefixLengthMismatch {
                expected: self.len(),
                got: seq.len(),
            });
        }
        laws_from_factor(self.cholesky(), seq)
    }

    /// Per-position log densities `ln p(z_i | z_<i)`.
    pub fn conditional_log_densities(&self, seq: &[f64]) -> Result<Vec<f64>> {
        if seq.len() > self.len() {
            return Err(GaussianError::PrefixLengthMismatch {
                expected: self.len(),
                got: seq.len(),
            });
        }
        log_densities(self.cholesky(), seq)
    }

    /// `n` i.i.d. draws from `N(0, Σ)`.
    ///
    /// Row `k` uses ChaCha8 seeded with `seed` on stream `k`, so the output
    /// is independent of thread scheduling.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Err(GaussianError::TooFewSamples { min: 1, got: 0 });
        }
        let factor = self.cholesky();
        let len = self.len();
        (0..n)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                let e: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
                Ok(factor.mul_lower(&e)?)
            })
            .collect()
    }

    /// Monte-Carlo bipartite MI via the chain-rule decomposition
    /// `Σ_i [ln p(y_i | x, y_<i) − ln p(y_i | y_<i)]`, averaged over `n`
    /// samples. Returns `(estimate, stderr)`.
    pub fn mc_bipartite_mi(&self, ell: usize, n: usize, seed: u64) -> Result<(f64, f64)> {
        let len = self.len();
        if ell == 0 || ell >= len {
            return Err(GaussianError::SplitOutOfRange { ell, len });
        }
        if n < 2 {
            return Err(GaussianError::TooFewSamples { min: 2, got: n });
        }
        let tail = self.covariance().block(ell..len)?.cholesky()?;
        let samples = self.sample(n, seed)?;
        let contributions: Vec<f64> = samples
            .par_iter()
            .map(|z| -> Result<f64> {
                let joint = log_densities(self.cholesky(), z)?;
                let marginal = log_densities(&tail, &z[ell..])?;
                Ok(joint[ell..]
                    .iter()
                    .zip(&marginal)
                    .map(|(a, b)| a - b)
                    .sum())
            })
            .collect::<Result<_>>()?;
        Ok(mean_and_stderr(&contributions))
    }

    /// Exact KL at `position` between the true conditional law given the
    /// prefix of `sample` and a model's Gaussian `(q_means[position],
    /// q_stds[position])`.
    pub fn conditional_kl(
        &self,
        q_means: &[f64],
        q_stds: &[f64],
        sample: &[f64],
        position: usize,
    ) -> Result<f64> {
        let len = self.len();
        if position >= len || position >= q_means.len() || position >= q_stds.len() {
            return Err(GaussianError::IndexOutOfRange {
                index: position,
                len: len.min(q_means.len()).min(q_stds.len()),
            });
        }
        if sample.len() < position {
            return Err(GaussianError::PrefixLengthMismatch {
                expected: position,
                got: sample.len(),
            });
        }
        let q_std = q_stds[position];
        if !(q_std > 0.0) {
            return Err(GaussianError::NonPositiveStd {
                position,
                std: q_std,
            });
        }
        let p = self.conditional_law(position, &sample[..position])?;
        Ok(gaussian_kl(p.mean, p.std, q_means[position], q_std))
    }

    /// Position-wise conditional KL averaged over samples.
    ///
    /// `q_means[s][i]`, `q_stds[s][i]` are the model's conditional parameters
    /// for sample `s` at position `i`. Returns one value per position.
    pub fn conditional_kl_curve(
        &self,
        samples: &[Vec<f64>],
        q_means: &[Vec<f64>],
        q_stds: &[Vec<f64>],
    ) -> Result<Vec<f64>> {
        if samples.is_empty() {
            return Err(GaussianError::TooFewSamples { min: 1, got: 0 });
        }
        if q_means.len() != samples.len() || q_stds.len() != samples.len() {
            return Err(GaussianError::PrefixLengthMismatch {
                expected: samples.len(),
                got: q_means.len().min(q_stds.len()),
            });
        }
        let len = samples[0].len();
        let per_sample: Vec<Vec<f64>> = samples
            .par_iter()
            .zip(q_means)
            .zip(q_stds)
            .map(|((z, mu), sd)| -> Result<Vec<f64>> {
                if z.len() != len || mu.len() != len || sd.len() != len {
                    return Err(GaussianError::PrefixLengthMismatch {
                        expected: len,
                        got: z.len().min(mu.len()).min(sd.len()),
                    });
                }
                let laws = self.conditional_laws(z)?;
                laws.iter()
                    .map(|p| {
                        let i = p.position;
                        if !(sd[i] > 0.0) {
                            return Err(GaussianError::NonPositiveStd {
                                position: i,
                                std: sd[i],
                            });
                        }
                        Ok(gaussian_kl(p.mean, p.std, mu[i], sd[i]))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let n = per_sample.len() as f64;
        Ok((0..len)
            .map(|i| crate::numeric::compensated_sum(per_sample.iter().map(|r| r[i])) / n)
            .collect())
    }
}
