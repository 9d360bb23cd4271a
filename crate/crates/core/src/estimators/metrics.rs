//! Per-position NLL and KL curves over the scored segment.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use super::EstimateError;
use crate::logprob::LogProbRecord;
use crate::numeric::compensated_sum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Smoothed {
    pub window: usize,
    pub values: Vec<f64>,
}

/// A metric indexed by 0-based absolute token position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCurve {
    pub positions: Vec<usize>,
    pub values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothed: Option<Smoothed>,
}

impl MetricCurve {
    pub fn new(positions: Vec<usize>, values: Vec<f64>) -> Result<Self, EstimateError> {
        if positions.len() != values.len() {
            return Err(EstimateError::LengthMismatch(format!(
                "{} positions but {} values",
                positions.len(),
                values.len()
            )));
        }
        Ok(Self {
            positions,
            values,
            smoothed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Writes `position,value[,smoothed]` rows after any `#` header lines.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[String]) -> std::io::Result<()> {
        for h in header {
            writeln!(out, "# {h}")?;
        }
        match &self.smoothed {
            Some(s) => {
                writeln!(out, "position,value,smoothed")?;
                for ((p, v), m) in self.positions.iter().zip(&self.values).zip(&s.values) {
                    writeln!(out, "{p},{v},{m}")?;
                }
            }
            None => {
                writeln!(out, "position,value")?;
                for (p, v) in self.positions.iter().zip(&self.values) {
                    writeln!(out, "{p},{v}")?;
                }
            }
        }
        Ok(())
    }

    /// Reads `position,value` columns; a `smoothed` column is ignored.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, EstimateError> {
        let bad = |line: usize, msg: &str| EstimateError::LengthMismatch(format!("curve CSV line {line}: {msg}"));
        let mut positions = Vec::new();
        let mut values = Vec::new();
        let mut seen_header = false;
        for (i, line) in BufReader::new(input).lines().enumerate() {
            let line = line.map_err(|e| bad(i + 1, &e.to_string()))?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            if !seen_header {
                seen_header = true;
                if t.starts_with("position") {
                    continue;
                }
            }
            let mut cols = t.split(',');
            let p = cols
                .next()
                .and_then(|c| c.trim().parse::<usize>().ok())
                .ok_or_else(|| bad(i + 1, "bad position"))?;
            let v = cols
                .next()
                .and_then(|c| c.trim().parse::<f64>().ok())
                .ok_or_else(|| bad(i + 1, "bad value"))?;
            positions.push(p);
            values.push(v);
        }
        Self::new(positions, values)
    }
}

/// Mean negative log-likelihood at each scored position `ell..L`.
pub fn positionwise_nll(records: &[LogProbRecord]) -> Result<MetricCurve, EstimateError> {
    let first = records.first().ok_or(EstimateError::TooFewSamples { min: 1, got: 0 })?;
    let (ell, len) = (first.ell, first.length);
    let k = len.saturating_sub(ell);
    for r in records {
        if r.ell != ell || r.length != len || r.logprobs.len() != k {
            return Err(EstimateError::LengthMismatch(format!(
                "record {:?} has (ell, L, n) = ({}, {}, {}), expected ({ell}, {len}, {k})",
                r.sample_id,
                r.ell,
                r.length,
                r.logprobs.len()
            )));
        }
    }
    let bad: Vec<String> = records
        .iter()
        .filter(|r| r.logprobs.iter().any(|v| !v.is_finite()))
        .map(|r| r.sample_id.clone())
        .collect();
    if !bad.is_empty() {
        return Err(EstimateError::NonFiniteLogProb {
            role: first.role.to_string(),
            offenders: bad,
        });
    }
    let n = records.len() as f64;
    let values = (0..k)
        .map(|j| -compensated_sum(records.iter().map(|r| r.logprobs[j])) / n)
        .collect();
    MetricCurve::new((ell..len).collect(), values)
}

/// KL curve `NLL_q − NLL_p` on samples drawn from p.
pub fn positionwise_kl(p_nll: &MetricCurve, q_nll: &MetricCurve) -> Result<MetricCurve, EstimateError> {
    if p_nll.positions != q_nll.positions {
        return Err(EstimateError::LengthMismatch(
            "NLL curves cover different positions".into(),
        ));
    }
    let values = p_nll
        .values
        .iter()
        .zip(&q_nll.values)
        .map(|(p, q)| q - p)
        .collect();
    MetricCurve::new(p_nll.positions.clone(), values)
}

/// Arithmetic mean of a curve.
pub fn avg_of(curve: &MetricCurve) -> Result<f64, EstimateError> {
    if curve.is_empty() {
        return Err(EstimateError::TooFewSamples { min: 1, got: 0 });
    }
    Ok(compensated_sum(curve.values.iter().copied()) / curve.len() as f64)
}

/// Centered moving average with an odd window, truncated at the edges.
pub fn smooth_curve(curve: &MetricCurve, window: usize) -> Result<MetricCurve, EstimateError> {
    let n = curve.len();
    if window == 0 || window.is_multiple_of(2) || window > n {
        return Err(EstimateError::BadWindow { window, len: n });
    }
    let h = window / 2;
    let values = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h + 1).min(n);
            compensated_sum(curve.values[lo..hi].iter().copied()) / (hi - lo) as f64
        })
        .collect();
    let mut out = curve.clone();
    out.smoothed = Some(Smoothed { window, values });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::gaussian_kl;
    use crate::logprob::Role;
    use proptest::prelude::*;

    fn rec(id: &str, ell: usize, len: usize, lps: Vec<f64>) -> LogProbRecord {
        let k = lps.len();
        LogProbRecord::new(id, Role::Conditional, ell, len, vec![0; k], lps)
    }

    #[test]
    fn nll_positions_and_means() {
        let rs = vec![rec("a", 2, 5, vec![-1.0, -2.0, -3.0]), rec("b", 2, 5, vec![-3.0, -2.0, -1.0])];
        let c = positionwise_nll(&rs).unwrap();
        assert_eq!(c.positions, vec![2, 3, 4]);
        assert_eq!(c.values, vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn nll_rejects_mixed_splits_and_neg_inf() {
        let rs = vec![rec("a", 2, 5, vec![-1.0; 3]), rec("b", 1, 5, vec![-1.0; 4])];
        assert!(matches!(positionwise_nll(&rs), Err(EstimateError::LengthMismatch(_))));
        let rs = vec![rec("a", 2, 5, vec![-1.0, f64::NEG_INFINITY, -1.0])];
        assert!(matches!(
            positionwise_nll(&rs),
            Err(EstimateError::NonFiniteLogProb { .. })
        ));
    }

    #[test]
    fn kl_is_q_minus_p() {
        let p = MetricCurve::new(vec![0], vec![0.0]).unwrap();
        let q = MetricCurve::new(vec![0], vec![gaussian_kl(0.0, 1.0, 0.0, 2.0)]).unwrap();
        let kl = positionwise_kl(&p, &q).unwrap();
        let want = 2f64.ln() + 1.0 / 8.0 - 0.5;
        assert!((kl.values[0] - want).abs() < 1e-12);
        assert!((kl.values[0] - 0.318147).abs() < 1e-6);
    }

    #[test]
    fn window_one_is_identity() {
        let c = MetricCurve::new(vec![4, 5, 6], vec![1.0, 7.0, -2.0]).unwrap();
        let s = smooth_curve(&c, 1).unwrap();
        assert_eq!(s.smoothed.unwrap().values, c.values);
    }

    #[test]
    fn edge_truncation() {
        let c = MetricCurve::new(vec![0, 1, 2, 3], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = smooth_curve(&c, 3).unwrap().smoothed.unwrap().values;
        assert_eq!(s, vec![1.5, 2.0, 3.0, 3.5]);
    }

    #[test]
    fn spike_spreads_over_window() {
        let c = MetricCurve::new((0..5).collect(), vec![0.0, 0.0, 3.0, 0.0, 0.0]).unwrap();
        let s = smooth_curve(&c, 3).unwrap().smoothed.unwrap().values;
        assert_eq!(s, vec![0.0, 1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn single_record_and_uniform_q() {
        let c = positionwise_nll(&[rec("a", 1, 4, vec![-0.5, -1.5, -2.5])]).unwrap();
        assert_eq!(c.values, vec![0.5, 1.5, 2.5]);
        let lm = -(5f64.ln());
        let rs: Vec<_> = (0..4).map(|i| rec(&i.to_string(), 0, 6, vec![lm; 6])).collect();
        let c = positionwise_nll(&rs).unwrap();
        assert!(c.values.iter().all(|v| (v + lm).abs() < 1e-15));
        let zero = positionwise_kl(&c, &c).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));
        assert_eq!(avg_of(&zero).unwrap(), 0.0);
    }

    #[test]
    fn bad_windows() {
        let c = MetricCurve::new(vec![0, 1, 2], vec![1.0; 3]).unwrap();
        for w in [0, 2, 5] {
            assert!(matches!(smooth_curve(&c, w), Err(EstimateError::BadWindow { .. })));
        }
    }

    #[test]
    fn csv_round_trip() {
        let c = smooth_curve(&MetricCurve::new(vec![3, 4, 5], vec![0.5, 0.25, 1e-17]).unwrap(), 3).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf, &["note".into()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# note\nposition,value,smoothed\n"));
        let back = MetricCurve::read_csv(&buf[..]).unwrap();
        assert_eq!(back.positions, c.positions);
        assert_eq!(back.values, c.values);
    }

    proptest! {
        #[test]
        fn avg_is_linear(
            a in proptest::collection::vec(-50.0f64..50.0, 1..40),
            s in -3.0f64..3.0,
            t in -3.0f64..3.0,
        ) {
            let b: Vec<f64> = a.iter().map(|x| x * 0.7 - 1.0).collect();
            let pos: Vec<usize> = (0..a.len()).collect();
            let ca = MetricCurve::new(pos.clone(), a.clone()).unwrap();
            let cb = MetricCurve::new(pos.clone(), b.clone()).unwrap();
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| s * x + t * y).collect();
            let cm = MetricCurve::new(pos, mix).unwrap();
            let lhs = avg_of(&cm).unwrap();
            let rhs = s * avg_of(&ca).unwrap() + t * avg_of(&cb).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }

        #[test]
        fn smoothing_preserves_constants(v in -10.0f64..10.0, n in 1usize..30, w in 0usize..15) {
            let w = (2 * w + 1).min(if n % 2 == 1 { n } else { n - 1 });
            let c = MetricCurve::new((0..n).collect(), vec![v; n]).unwrap();
            let s = smooth_curve(&c, w).unwrap().smoothed.unwrap().values;
            for x in s {
                prop_assert!((x - v).abs() < 1e-12);
            }
        }
    }
}
