//! The JSONL record schema.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::LogProbError;

pub const SCHEMA_VERSION: u32 = 1;
pub(crate) const NEG_INF_SENTINEL: &str = "-inf";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// `log q(y_i | x, y_<i)` for each position of the second segment.
    Conditional,
    /// `log q(y_i | BOS, y_<i)`, the second segment scored without its context.
    Marginal,
    /// `log q(y'_i | x, y'_<i)` where `y'` comes from the partner sample.
    ShuffledConditional,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Role::Conditional => "conditional",
            Role::Marginal => "marginal",
            Role::ShuffledConditional => "shuffled_conditional",
        })
    }
}

/// Per-sample, per-position natural-log probabilities of the second segment
/// `y = w[ell..L]` of one sampled sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogProbRecord {
    pub schema_version: u32,
    pub sample_id: String,
    pub role: Role,
    pub ell: usize,
    #[serde(rename = "L")]
    pub length: usize,
    pub token_ids: Vec<u64>,
    #[serde(serialize_with = "ser_logprobs", deserialize_with = "de_logprobs")]
    pub logprobs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner_id: Option<String>,
}

impl LogProbRecord {
    pub fn new(
        sample_id: impl Into<String>,
        role: Role,
        ell: usize,
        length: usize,
        token_ids: Vec<u64>,
        logprobs: Vec<f64>,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            sample_id: sample_id.into(),
            role,
            ell,
            length,
            token_ids,
            logprobs,
            partner_id: None,
        }
    }

    pub fn with_partner(mut self, partner: impl Into<String>) -> Self {
        self.partner_id = Some(partner.into());
        self
    }

    /// Number of scored positions, `L − ell`.
    pub fn segment_len(&self) -> usize {
        self.length.saturating_sub(self.ell)
    }

    /// Schema violations of this record in isolation.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            out.push(format!("unsupported schema_version {}", self.schema_version));
        }
        if self.length == 0 {
            out.push("L must be positive".into());
        }
        if self.ell >= self.length {
            out.push(format!("ell {} must be < L {}", self.ell, self.length));
        }
        let want = self.segment_len();
        if self.token_ids.len() != want {
            out.push(format!("token_ids has length {}, expected L-ell = {want}", self.token_ids.len()));
        }
        if self.logprobs.len() != want {
            out.push(format!("logprobs has length {}, expected L-ell = {want}", self.logprobs.len()));
        }
        for (i, &lp) in self.logprobs.iter().enumerate() {
            if lp.is_nan() || lp == f64::INFINITY {
                out.push(format!("logprobs[{i}] is not a number or -inf"));
            } else if lp > 0.0 {
                out.push(format!("logprobs[{i}] = {lp} is positive"));
            }
        }
        match (&self.role, &self.partner_id) {
            (Role::ShuffledConditional, None) => out.push("shuffled_conditional record lacks partner_id".into()),
            (Role::ShuffledConditional, Some(p)) if *p == self.sample_id => {
                out.push(format!("fixed point: partner_id equals sample_id {p:?}"))
            }
            (Role::Conditional | Role::Marginal, Some(_)) => {
                out.push(format!("partner_id is only allowed on shuffled_conditional, not {}", self.role))
            }
            _ => {}
        }
        out
    }
}

fn ser_logprobs<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for &x in v {
        if x == f64::NEG_INFINITY {
            seq.serialize_element(NEG_INF_SENTINEL)?;
        } else if x.is_finite() {
            seq.serialize_element(&x)?;
        } else if x.is_nan() {
            seq.serialize_element("nan")?;
        } else {
            seq.serialize_element("inf")?;
        }
    }
    seq.end()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawLogProb {
    Num(f64),
    Text(String),
}

fn de_logprobs<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    let raw = Vec::<RawLogProb>::deserialize(d)?;
    raw.into_iter()
        .map(|r| match r {
            RawLogProb::Num(x) => Ok(x),
            RawLogProb::Text(t) if t == NEG_INF_SENTINEL => Ok(f64::NEG_INFINITY),
            RawLogProb::Text(t) if t == "nan" => Ok(f64::NAN),
            RawLogProb::Text(t) if t == "inf" => Ok(f64::INFINITY),
            RawLogProb::Text(t) => Err(serde::de::Error::custom(format!(
                "logprob string {t:?} is not the \"-inf\" sentinel"
            ))),
        })
        .collect()
}

/// Parses one line without semantic checks.
pub(crate) fn parse_line(line: &str) -> Result<LogProbRecord, String> {
    let rec: LogProbRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    Ok(rec)
}

/// Reads a JSONL record file, rejecting the first invalid line.
///
/// Blank lines are skipped. Every check performed by
/// [`validate`](super::validate) applies here too, so anything this accepts
/// validates cleanly.
pub fn read_records<R: Read>(input: R) -> Result<Vec<LogProbRecord>, LogProbError> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let rec = parse_line(&line).map_err(|message| LogProbError::InvalidRecord { line: line_no, message })?;
        if let Some(message) = rec.violations().into_iter().next() {
            return Err(LogProbError::InvalidRecord { line: line_no, message });
        }
        if !seen.insert((rec.sample_id.clone(), rec.role)) {
            return Err(LogProbError::InvalidRecord {
                line: line_no,
                message: format!("duplicate {} record for sample {:?}", rec.role, rec.sample_id),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

/// Writes records canonically: sorted by `(sample_id, role)`, one compact
/// JSON object per line, floats in shortest round-trip form.
pub fn write_records<W: Write>(records: &[LogProbRecord], out: W) -> Result<(), LogProbError> {
    let mut sorted: Vec<&LogProbRecord> = records.iter().collect();
    sorted.sort_by(|a, b| (&a.sample_id, a.role).cmp(&(&b.sample_id, b.role)));
    let mut w = BufWriter::new(out);
    for r in sorted {
        serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wire_format() {
        let r = LogProbRecord::new("s1", Role::ShuffledConditional, 2, 4, vec![3, 9], vec![-0.5, f64::NEG_INFINITY])
            .with_partner("s2");
        let mut buf = Vec::new();
        write_records(std::slice::from_ref(&r), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "{\"schema_version\":1,\"sample_id\":\"s1\",\"role\":\"shuffled_conditional\",\"ell\":2,\"L\":4,\
             \"token_ids\":[3,9],\"logprobs\":[-0.5,\"-inf\"],\"partner_id\":\"s2\"}\n"
        );
        assert_eq!(read_records(text.as_bytes()).unwrap(), vec![r]);
    }

    #[test]
    fn unknown_fields_ignored_unknown_version_rejected() {
        let ok = r#"{"schema_version":1,"sample_id":"a","role":"marginal","ell":0,"L":1,"token_ids":[5],"logprobs":[-1],"extra":true}"#;
        assert_eq!(read_records(ok.as_bytes()).unwrap().len(), 1);
        let bad = ok.replace("\"schema_version\":1", "\"schema_version\":2");
        assert!(matches!(
            read_records(bad.as_bytes()),
            Err(LogProbError::InvalidRecord { line: 1, .. })
        ));
    }

    fn arb_record() -> impl Strategy<Value = LogProbRecord> {
        (
            "[a-z0-9]{1,6}",
            prop_oneof![Just(Role::Conditional), Just(Role::Marginal)],
            0usize..4,
            1usize..6,
            any::<u64>(),
        )
            .prop_flat_map(|(id, role, ell, extra, seed)| {
                let n = extra;
                proptest::collection::vec(
                    prop_oneof![
                        9 => -50.0f64..=0.0,
                        1 => Just(f64::NEG_INFINITY),
                    ],
                    n,
                )
                .prop_map(move |lps| {
                    let ids = (0..n as u64).map(|k| k.wrapping_mul(seed) % 50_000).collect();
                    LogProbRecord::new(id.clone(), role, ell, ell + n, ids, lps)
                })
            })
    }

    proptest! {
        #[test]
        fn canonical_files_round_trip_bytewise(recs in proptest::collection::vec(arb_record(), 0..8)) {
            let mut uniq = std::collections::BTreeMap::new();
            for r in recs { uniq.insert((r.sample_id.clone(), r.role), r); }
            let recs: Vec<_> = uniq.into_values().collect();
            let mut first = Vec::new();
            write_records(&recs, &mut first).unwrap();
            let back = read_records(&first[..]).unwrap();
            let mut second = Vec::new();
            write_records(&back, &mut second).unwrap();
            prop_assert_eq!(first, second);
        }
    }
}
