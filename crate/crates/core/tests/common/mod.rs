//! Toy token chains with exact enumeration oracles, shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use miscale::logprob::{make_shuffle_manifest, LogProbRecord, Role};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Symmetric Markov chain over `m` symbols. The first token is uniform; each
/// next token repeats the previous one with probability `stay` and otherwise
/// moves to one of the other `m − 1` symbols uniformly.
#[derive(Debug, Clone, Copy)]
pub struct Chain {
    pub m: u32,
    pub stay: f64,
}

impl Chain {
    pub fn identical(m: u32) -> Self {
        Self { m, stay: 1.0 }
    }

    pub fn softened(m: u32, delta: f64) -> Self {
        Self { m, stay: 1.0 - delta }
    }

    /// Every token independent and uniform.
    pub fn independent(m: u32) -> Self {
        Self {
            m,
            stay: 1.0 / f64::from(m),
        }
    }

    pub fn trans(&self, a: u32, b: u32) -> f64 {
        if a == b {
            self.stay
        } else {
            (1.0 - self.stay) / f64::from(self.m - 1)
        }
    }

    pub fn prob(&self, seq: &[u32]) -> f64 {
        let mut p = 1.0 / f64::from(self.m);
        for w in seq.windows(2) {
            p *= self.trans(w[0], w[1]);
        }
        p
    }

    /// All `m^len` sequences with their probabilities.
    pub fn enumerate(&self, len: usize) -> Vec<(Vec<u32>, f64)> {
        let total = (self.m as usize).pow(len as u32);
        (0..total)
            .map(|mut k| {
                let mut s = vec![0u32; len];
                for slot in s.iter_mut().rev() {
                    *slot = (k % self.m as usize) as u32;
                    k /= self.m as usize;
                }
                let p = self.prob(&s);
                (s, p)
            })
            .collect()
    }

    pub fn sample(&self, len: usize, n: usize, seed: u64) -> Vec<Vec<u32>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample_one(len, &mut rng)).collect()
    }

    pub fn sample_one<R: Rng>(&self, len: usize, rng: &mut R) -> Vec<u32> {
        let mut s = Vec::with_capacity(len);
        s.push(rng.random_range(0..self.m));
        while s.len() < len {
            let prev = *s.last().unwrap();
            let next = if rng.random::<f64>() < self.stay {
                prev
            } else {
                let k = rng.random_range(0..self.m - 1);
                if k >= prev {
                    k + 1
                } else {
                    k
                }
            };
            s.push(next);
        }
        s
    }

    /// `log q(y_i | x, y_<i)` under the exact chain.
    pub fn conditional_logprobs(&self, x: &[u32], y: &[u32]) -> Vec<f64> {
        let mut prev = *x.last().expect("non-empty prefix");
        y.iter()
            .map(|&t| {
                let lp = self.trans(prev, t).ln();
                prev = t;
                lp
            })
            .collect()
    }

    /// `log q(y_i | BOS, y_<i)`: the first token has the stationary
    /// (uniform) law.
    pub fn marginal_logprobs(&self, y: &[u32]) -> Vec<f64> {
        let mut out = vec![-f64::from(self.m).ln()];
        out.extend(y.windows(2).map(|w| self.trans(w[0], w[1]).ln()));
        out
    }

    /// `I(X; Y)` for the split at `ell` by full enumeration.
    pub fn true_bipartite_mi(&self, len: usize, ell: usize) -> f64 {
        let all = self.enumerate(len);
        let mut px: HashMap<&[u32], f64> = HashMap::new();
        let mut py: HashMap<&[u32], f64> = HashMap::new();
        for (s, p) in &all {
            *px.entry(&s[..ell]).or_default() += p;
            *py.entry(&s[ell..]).or_default() += p;
        }
        all.iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|(s, p)| p * (p / (px[&s[..ell]] * py[&s[ell..]])).ln())
            .sum()
    }

    /// Expected vCLUB value at `q = p`:
    /// `E_{p(x,y)} log p(y|x) − E_{p(x)p(y)} log p(y|x)`.
    pub fn vclub_expectation(&self, len: usize, ell: usize) -> f64 {
        let all = self.enumerate(len);
        let mut px: HashMap<Vec<u32>, f64> = HashMap::new();
        let mut py: HashMap<Vec<u32>, f64> = HashMap::new();
        for (s, p) in &all {
            *px.entry(s[..ell].to_vec()).or_default() += p;
            *py.entry(s[ell..].to_vec()).or_default() += p;
        }
        let log_cond = |x: &[u32], y: &[u32]| -> f64 { self.conditional_logprobs(x, y).iter().sum() };
        let matched: f64 = all
            .iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|(s, p)| p * log_cond(&s[..ell], &s[ell..]))
            .sum();
        let mut crossed = 0.0;
        for (x, pxv) in &px {
            for (y, pyv) in &py {
                if pxv * pyv > 0.0 {
                    crossed += pxv * pyv * log_cond(x, y);
                }
            }
        }
        matched - crossed
    }
}

pub fn sample_id(i: usize) -> String {
    format!("s{i:06}")
}

/// Conditional and marginal records for each sequence, split at `ell`.
pub fn records(chain: &Chain, seqs: &[Vec<u32>], ell: usize) -> (Vec<LogProbRecord>, Vec<LogProbRecord>) {
    let mut cond = Vec::with_capacity(seqs.len());
    let mut marg = Vec::with_capacity(seqs.len());
    for (i, s) in seqs.iter().enumerate() {
        let (x, y) = s.split_at(ell);
        let ids: Vec<u64> = y.iter().map(|&t| u64::from(t)).collect();
        cond.push(LogProbRecord::new(
            sample_id(i),
            Role::Conditional,
            ell,
            s.len(),
            ids.clone(),
            chain.conditional_logprobs(x, y),
        ));
        marg.push(LogProbRecord::new(
            sample_id(i),
            Role::Marginal,
            ell,
            s.len(),
            ids,
            chain.marginal_logprobs(y),
        ));
    }
    (cond, marg)
}

/// Shuffled-conditional records: each sample's prefix scored against its
/// partner's segment, with partners from a seeded derangement.
pub fn shuffled_records(chain: &Chain, seqs: &[Vec<u32>], ell: usize, seed: u64) -> Vec<LogProbRecord> {
    let ids: Vec<String> = (0..seqs.len()).map(sample_id).collect();
    let manifest = make_shuffle_manifest(&ids, seed).expect("derangement");
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    manifest
        .pairs
        .iter()
        .map(|p| {
            let i = index[p.sample_id.as_str()];
            let j = index[p.partner_id.as_str()];
            let x = &seqs[i][..ell];
            let y = &seqs[j][ell..];
            LogProbRecord::new(
                p.sample_id.clone(),
                Role::ShuffledConditional,
                ell,
                seqs[i].len(),
                y.iter().map(|&t| u64::from(t)).collect(),
                chain.conditional_logprobs(x, y),
            )
            .with_partner(p.partner_id.clone())
        })
        .collect()
}

/// Mutual information of the symmetric channel on `m` symbols that copies
/// the input with probability `r` and otherwise emits a uniform symbol.
pub fn copy_channel_mi(m: u32, r: f64) -> f64 {
    let m = f64::from(m);
    let same = (r + (1.0 - r) / m) / m;
    let diff = (1.0 - r) / (m * m);
    let term = |p: f64| if p > 0.0 { p * (p * m * m).ln() } else { 0.0 };
    m * term(same) + m * (m - 1.0) * term(diff)
}

/// Copy probability giving the requested channel MI, by bisection.
pub fn copy_prob_for_mi(m: u32, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if copy_channel_mi(m, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
