//! Bipartite MI from model log-probabilities: the direct estimator with the
//! leading-pair correction, and the vCLUB contrastive estimator.

use std::collections::BTreeMap;

use serde::Serialize;

use super::EstimateError;
use crate::entropy::{entropy_grassberger, CountTable};
use crate::logprob::{join_for_estimation, LogProbRecord};
use crate::numeric::{compensated_sum, mean_and_stderr, sample_variance};

/// Estimator output. `value` is always the documented combination of the
/// named `terms`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BipartiteEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub terms: BTreeMap<String, f64>,
    /// `value − truth` when a ground truth was supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl BipartiteEstimate {
    pub fn with_truth(mut self, truth: f64) -> Self {
        self.epsilon = Some(self.value - truth);
        self
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.get(name).copied()
    }
}

/// Options of the direct estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectConfig {
    /// Replace the first-two-token marginal term by a mixture with the
    /// Grassberger entropy of the leading pairs.
    pub correction: bool,
    /// Weight of the model's own first-two-token cross-entropy.
    pub model_weight: f64,
    /// Weight of the leading-pair n-gram entropy.
    pub ngram_weight: f64,
}

impl Default for DirectConfig {
    fn default() -> Self {
        Self {
            correction: true,
            model_weight: 0.2,
            ngram_weight: 0.8,
        }
    }
}

impl DirectConfig {
    pub fn uncorrected() -> Self {
        Self {
            correction: false,
            ..Self::default()
        }
    }
}

fn neg_inf_ids<'a>(recs: impl Iterator<Item = &'a LogProbRecord>) -> Vec<String> {
    recs.filter(|r| r.logprobs.iter().any(|v| !v.is_finite()))
        .map(|r| r.sample_id.clone())
        .collect()
}

fn check_lengths<'a>(recs: impl Iterator<Item = &'a LogProbRecord>) -> Result<(), EstimateError> {
    for r in recs {
        let want = r.segment_len();
        if r.logprobs.len() != want {
            return Err(EstimateError::LengthMismatch(format!(
                "{} record {:?} has {} logprobs, expected L-ell = {want}",
                r.role,
                r.sample_id,
                r.logprobs.len()
            )));
        }
    }
    Ok(())
}

fn neg_sum(v: &[f64]) -> f64 {
    -compensated_sum(v.iter().copied())
}

/// Direct estimator `H(p_Y, q_Y) − H(p_{Y|X}, q_{Y|X})`.
///
/// The conditional cross-entropy is the mean of `−Σ log q(y_i | x, y_<i)`.
/// The marginal cross-entropy is the mean of `−Σ_{i≥3} log q(y_i | BOS,
/// y_<i)` plus a first-two-token term: with the correction it is
/// `w_model·mean(−log q(y₁ y₂ | BOS)) + w_ngram·Ĥᴳ(leading pairs)`,
/// otherwise the raw model term.
pub fn direct_bipartite(
    cond: &[LogProbRecord],
    marg: &[LogProbRecord],
    leading_pairs: Option<&CountTable>,
    config: &DirectConfig,
) -> Result<BipartiteEstimate, EstimateError> {
    check_lengths(cond.iter().chain(marg))?;
    let data = join_for_estimation(cond, Some(marg), None, None)?;
    let n = data.len();
    if n < 2 {
        return Err(EstimateError::TooFewSamples { min: 2, got: n });
    }
    let bad = neg_inf_ids(cond.iter());
    if !bad.is_empty() {
        return Err(EstimateError::NonFiniteLogProb {
            role: "conditional".into(),
            offenders: bad,
        });
    }
    let bad = neg_inf_ids(marg.iter());
    if !bad.is_empty() {
        return Err(EstimateError::NonFiniteLogProb {
            role: "marginal".into(),
            offenders: bad,
        });
    }

    let ngram = if config.correction {
        if let Some(s) = data.samples.iter().find(|s| s.length - s.ell < 2) {
            return Err(EstimateError::LengthMismatch(format!(
                "sample {:?} has fewer than two scored tokens; the leading-pair correction needs two",
                s.sample_id
            )));
        }
        let table = leading_pairs.ok_or(EstimateError::MissingLeadingPairs)?;
        if table.total() != n as u64 {
            return Err(EstimateError::LeadingPairsMismatch {
                expected: n as u64,
                got: table.total(),
            });
        }
        Some(entropy_grassberger(table)?)
    } else {
        None
    };

    let mut cond_ce = Vec::with_capacity(n);
    let mut head = Vec::with_capacity(n);
    let mut tail = Vec::with_capacity(n);
    for s in &data.samples {
        let m = &s.marginal.expect("joined with marginals").logprobs;
        let k = m.len().min(2);
        cond_ce.push(neg_sum(&s.conditional.logprobs));
        head.push(neg_sum(&m[..k]));
        tail.push(neg_sum(&m[k..]));
    }
    let nf = n as f64;
    let mean = |v: &[f64]| compensated_sum(v.iter().copied()) / nf;
    let conditional_ce = mean(&cond_ce);
    let first_two_model = mean(&head);
    let marginal_tail = mean(&tail);
    let first_two_used = match ngram {
        Some(h) => config.model_weight * first_two_model + config.ngram_weight * h,
        None => first_two_model,
    };
    let marginal_ce = marginal_tail + first_two_used;
    let value = marginal_ce - conditional_ce;

    let head_weight = if ngram.is_some() { config.model_weight } else { 1.0 };
    let diffs: Vec<f64> = (0..n)
        .map(|i| tail[i] + head_weight * head[i] - cond_ce[i])
        .collect();
    let (_, stderr) = mean_and_stderr(&diffs);

    let mut terms = BTreeMap::new();
    terms.insert("conditional_cross_entropy".into(), conditional_ce);
    terms.insert("marginal_cross_entropy".into(), marginal_ce);
    terms.insert("marginal_tail".into(), marginal_tail);
    terms.insert("first_two_model".into(), first_two_model);
    terms.insert("first_two_used".into(), first_two_used);
    if let Some(h) = ngram {
        terms.insert("first_two_ngram".into(), h);
    }
    Ok(BipartiteEstimate {
        value,
        stderr,
        n_samples: n,
        terms,
        epsilon: None,
    })
}

/// vCLUB estimator `E_p[log q(y|x)] − E_{p_x ⊗ p_y}[log q(y'|x)]`, where the
/// second expectation runs over deranged pairs `(x, y')`.
///
/// The standard error adds the variances of the two independent means.
pub fn vclub_bipartite(
    cond: &[LogProbRecord],
    shuffled: &[LogProbRecord],
) -> Result<BipartiteEstimate, EstimateError> {
    check_lengths(cond.iter().chain(shuffled))?;
    if let Some(r) = shuffled
        .iter()
        .find(|r| r.partner_id.as_deref() == Some(r.sample_id.as_str()))
    {
        return Err(EstimateError::FixedPointInShuffle(r.sample_id.clone()));
    }
    if let Some(r) = shuffled.iter().find(|r| r.partner_id.is_none()) {
        return Err(EstimateError::SampleSetMismatch(format!(
            "shuffled record {:?} has no partner_id",
            r.sample_id
        )));
    }
    let data = join_for_estimation(cond, None, Some(shuffled), None)?;
    let n = data.len();
    if n < 2 {
        return Err(EstimateError::TooFewSamples { min: 2, got: n });
    }
    let bad = neg_inf_ids(cond.iter());
    if !bad.is_empty() {
        return Err(EstimateError::NonFiniteLogProb {
            role: "conditional".into(),
            offenders: bad,
        });
    }
    let bad: Vec<String> = shuffled
        .iter()
        .filter(|r| r.logprobs.iter().any(|v| !v.is_finite()))
        .map(|r| format!("{} <- {}", r.sample_id, r.partner_id.as_deref().unwrap_or("?")))
        .collect();
    if !bad.is_empty() {
        return Err(EstimateError::NonFiniteLogProb {
            role: "shuffled_conditional".into(),
            offenders: bad,
        });
    }

    let matched: Vec<f64> = data
        .samples
        .iter()
        .map(|s| compensated_sum(s.conditional.logprobs.iter().copied()))
        .collect();
    let deranged: Vec<f64> = data
        .samples
        .iter()
        .map(|s| compensated_sum(s.shuffled.expect("joined with shuffled").logprobs.iter().copied()))
        .collect();
    let nf = n as f64;
    let m = compensated_sum(matched.iter().copied()) / nf;
    let d = compensated_sum(deranged.iter().copied()) / nf;
    let stderr = ((sample_variance(&matched) + sample_variance(&deranged)) / nf).sqrt();

    let mut terms = BTreeMap::new();
    terms.insert("matched_log_likelihood".into(), m);
    terms.insert("shuffled_log_likelihood".into(), d);
    Ok(BipartiteEstimate {
        value: m - d,
        stderr,
        n_samples: n,
        terms,
        epsilon: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{pack_pair, Arity};
    use crate::logprob::Role;

    fn uniform_records(n: usize, m: f64, ell: usize, len: usize) -> (Vec<LogProbRecord>, Vec<LogProbRecord>) {
        let k = len - ell;
        let lp = -(m.ln());
        let cond = (0..n)
            .map(|i| LogProbRecord::new(format!("s{i:03}"), Role::Conditional, ell, len, vec![0; k], vec![lp; k]))
            .collect();
        let shuf = (0..n)
            .map(|i| {
                LogProbRecord::new(format!("s{i:03}"), Role::ShuffledConditional, ell, len, vec![0; k], vec![lp; k])
                    .with_partner(format!("s{:03}", (i + 1) % n))
            })
            .collect();
        (cond, shuf)
    }

    #[test]
    fn vclub_is_exactly_zero_for_uniform_q() {
        let (cond, shuf) = uniform_records(10, 7.0, 3, 8);
        let e = vclub_bipartite(&cond, &shuf).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.term("matched_log_likelihood").unwrap(), -5.0 * 7f64.ln());
    }

    #[test]
    fn vclub_rejects_fixed_points_and_neg_inf() {
        let (cond, mut shuf) = uniform_records(4, 3.0, 1, 3);
        shuf[2].partner_id = Some(shuf[2].sample_id.clone());
        assert!(matches!(
            vclub_bipartite(&cond, &shuf),
            Err(EstimateError::FixedPointInShuffle(id)) if id == "s002"
        ));
        let (cond, mut shuf) = uniform_records(4, 3.0, 1, 3);
        shuf[1].logprobs[0] = f64::NEG_INFINITY;
        match vclub_bipartite(&cond, &shuf) {
            Err(EstimateError::NonFiniteLogProb { offenders, .. }) => {
                assert_eq!(offenders, vec!["s001 <- s002".to_string()])
            }
            other => panic!("{other:?}"),
        }
    }

    fn direct_fixture() -> (Vec<LogProbRecord>, Vec<LogProbRecord>, CountTable) {
        let cond: Vec<_> = (0..6)
            .map(|i| {
                LogProbRecord::new(
                    format!("s{i}"),
                    Role::Conditional,
                    2,
                    6,
                    vec![i, i + 1, 0, 0],
                    vec![-0.1 * i as f64, -0.3, -0.2, -0.05],
                )
            })
            .collect();
        let marg: Vec<_> = (0..6)
            .map(|i| {
                LogProbRecord::new(
                    format!("s{i}"),
                    Role::Marginal,
                    2,
                    6,
                    vec![i, i + 1, 0, 0],
                    vec![-1.5, -0.9 - 0.01 * i as f64, -0.4, -0.3],
                )
            })
            .collect();
        let pairs = CountTable::from_counts(Arity::Pair, (0..6u32).map(|i| (pack_pair(i, i + 1), 1)));
        (cond, marg, pairs)
    }

    #[test]
    fn correction_shifts_by_exact_term_difference() {
        let (cond, marg, pairs) = direct_fixture();
        let on = direct_bipartite(&cond, &marg, Some(&pairs), &DirectConfig::default()).unwrap();
        let off = direct_bipartite(&cond, &marg, None, &DirectConfig::uncorrected()).unwrap();
        let a = on.term("first_two_model").unwrap();
        let b = on.term("first_two_ngram").unwrap();
        let c = off.term("first_two_used").unwrap();
        assert_eq!(a, c);
        let shift = (0.2 * a + 0.8 * b) - c;
        assert!((on.value - off.value - shift).abs() < 1e-12);
        for e in [&on, &off] {
            let combo = e.term("marginal_cross_entropy").unwrap() - e.term("conditional_cross_entropy").unwrap();
            assert!((e.value - combo).abs() < 1e-12);
            assert!(e.stderr > 0.0);
        }
    }

    #[test]
    fn direct_is_invariant_to_record_order() {
        let (cond, marg, pairs) = direct_fixture();
        let a = direct_bipartite(&cond, &marg, Some(&pairs), &DirectConfig::default()).unwrap();
        let mut rc = cond.clone();
        rc.reverse();
        let mut rm = marg.clone();
        rm.rotate_left(2);
        let b = direct_bipartite(&rc, &rm, Some(&pairs), &DirectConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn direct_error_paths() {
        let (cond, marg, pairs) = direct_fixture();
        assert!(matches!(
            direct_bipartite(&cond, &marg[..5], Some(&pairs), &DirectConfig::default()),
            Err(EstimateError::SampleSetMismatch(_))
        ));
        let mut short = pairs.clone();
        short.increment(pack_pair(9, 9));
        assert!(matches!(
            direct_bipartite(&cond, &marg, Some(&short), &DirectConfig::default()),
            Err(EstimateError::LeadingPairsMismatch { expected: 6, got: 7 })
        ));
        assert!(matches!(
            direct_bipartite(&cond, &marg, None, &DirectConfig::default()),
            Err(EstimateError::MissingLeadingPairs)
        ));
        let mut bad = marg.clone();
        bad[3].logprobs[2] = f64::NEG_INFINITY;
        assert!(matches!(
            direct_bipartite(&cond, &bad, None, &DirectConfig::uncorrected()),
            Err(EstimateError::NonFiniteLogProb { .. })
        ));
        let mut split = marg.clone();
        split[0].length = 7;
        split[0].token_ids.push(0);
        split[0].logprobs.push(-1.0);
        assert!(matches!(
            direct_bipartite(&cond, &split, None, &DirectConfig::uncorrected()),
            Err(EstimateError::LengthMismatch(_))
        ));
    }
}
