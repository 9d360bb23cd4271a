//! Log-probability records produced by an external autoregressive model,
//! their validation, shuffle manifests and the join that aligns them per
//! sample.
//!
//! Wire format: UTF-8 JSONL, one [`LogProbRecord`] per line. Unknown fields
//! are ignored; any `schema_version` other than 1 is rejected. `-∞` is
//! written as the string `"-inf"`.

mod record;

pub use record::{read_records, write_records, LogProbRecord, Role, SCHEMA_VERSION};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Read};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogProbError {
    #[error("line {line}: {message}")]
    InvalidRecord { line: usize, message: String },
    #[error("need at least 2 samples for a derangement, got {0}")]
    TooFewSamples(usize),
    #[error("duplicate sample id {0:?}")]
    DuplicateSample(String),
    #[error("sample sets differ: {0}")]
    SampleSetMismatch(String),
    #[error("inconsistent split for sample {sample_id:?}: {detail}")]
    InconsistentSplit { sample_id: String, detail: String },
    #[error("expected {expected} records, found a {found} record for sample {sample_id:?}")]
    RoleMismatch {
        expected: Role,
        found: Role,
        sample_id: String,
    },
    #[error("invalid shuffle manifest: {0}")]
    InvalidManifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One schema problem found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub lines: usize,
    pub records: usize,
    pub role_counts: BTreeMap<Role, usize>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every line of a record stream and reports all violations with
/// 1-based line numbers. Never fails on content, only on I/O.
pub fn validate<R: Read>(input: R) -> Result<ValidationReport, LogProbError> {
    let mut report = ValidationReport::default();
    let mut seen: HashMap<(String, Role), usize> = HashMap::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        report.lines = line_no;
        if line.trim().is_empty() {
            continue;
        }
        let rec = match record::parse_line(&line) {
            Ok(r) => r,
            Err(message) => {
                report.violations.push(Violation { line: line_no, message });
                continue;
            }
        };
        report.records += 1;
        *report.role_counts.entry(rec.role).or_insert(0) += 1;
        for message in rec.violations() {
            report.violations.push(Violation { line: line_no, message });
        }
        if let Some(first) = seen.insert((rec.sample_id.clone(), rec.role), line_no) {
            report.violations.push(Violation {
                line: line_no,
                message: format!(
                    "duplicate {} record for sample {:?} (first on line {first})",
                    rec.role, rec.sample_id
                ),
            });
        }
    }
    Ok(report)
}

/// A fixed-point-free pairing of samples: the first segment of `sample_id`
/// is scored against the second segment of `partner_id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShuffleManifest {
    pub seed: u64,
    pub pairs: Vec<ShufflePair>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShufflePair {
    pub sample_id: String,
    pub partner_id: String,
}

impl ShuffleManifest {
    /// Checks the derangement invariants.
    pub fn check(&self) -> Result<(), LogProbError> {
        let mut sources = BTreeSet::new();
        let mut partners = BTreeSet::new();
        for p in &self.pairs {
            if p.sample_id == p.partner_id {
                return Err(LogProbError::InvalidManifest(format!("fixed point at {:?}", p.sample_id)));
            }
            if !sources.insert(p.sample_id.as_str()) {
                return Err(LogProbError::InvalidManifest(format!("{:?} appears twice as a source", p.sample_id)));
            }
            if !partners.insert(p.partner_id.as_str()) {
                return Err(LogProbError::InvalidManifest(format!("{:?} appears twice as a partner", p.partner_id)));
            }
        }
        if sources != partners {
            return Err(LogProbError::InvalidManifest(
                "partners are not a permutation of the sources".into(),
            ));
        }
        Ok(())
    }

    pub fn partner_of(&self) -> HashMap<&str, &str> {
        self.pairs
            .iter()
            .map(|p| (p.sample_id.as_str(), p.partner_id.as_str()))
            .collect()
    }

    pub fn from_json<R: Read>(input: R) -> Result<Self, LogProbError> {
        let m: Self = serde_json::from_reader(input)?;
        m.check()?;
        Ok(m)
    }
}

/// Seeded derangement of `sample_ids`, drawn by rejecting permutations that
/// have a fixed point. Ids are sorted first, so the input order is
/// irrelevant.
pub fn make_shuffle_manifest<S: AsRef<str>>(sample_ids: &[S], seed: u64) -> Result<ShuffleManifest, LogProbError> {
    let mut ids: Vec<&str> = sample_ids.iter().map(AsRef::as_ref).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(LogProbError::DuplicateSample(w[0].to_string()));
    }
    if ids.len() < 2 {
        return Err(LogProbError::TooFewSamples(ids.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..ids.len()).collect();
    loop {
        perm.shuffle(&mut rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            break;
        }
    }
    Ok(ShuffleManifest {
        seed,
        pairs: ids
            .iter()
            .zip(&perm)
            .map(|(id, &p)| ShufflePair {
                sample_id: id.to_string(),
                partner_id: ids[p].to_string(),
            })
            .collect(),
    })
}

/// Records of one sample across roles.
#[derive(Debug, Clone)]
pub struct AlignedSample<'a> {
    pub sample_id: &'a str,
    pub ell: usize,
    pub length: usize,
    pub conditional: &'a LogProbRecord,
    pub marginal: Option<&'a LogProbRecord>,
    pub shuffled: Option<&'a LogProbRecord>,
}

/// Per-sample view sorted by `sample_id`.
#[derive(Debug, Clone)]
pub struct AlignedDataset<'a> {
    pub samples: Vec<AlignedSample<'a>>,
}

impl AlignedDataset<'_> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn index_by_id(records: &[LogProbRecord], role: Role) -> Result<BTreeMap<&str, &LogProbRecord>, LogProbError> {
    let mut out = BTreeMap::new();
    for r in records {
        if r.role != role {
            return Err(LogProbError::RoleMismatch {
                expected: role,
                found: r.role,
                sample_id: r.sample_id.clone(),
            });
        }
        if out.insert(r.sample_id.as_str(), r).is_some() {
            return Err(LogProbError::DuplicateSample(r.sample_id.clone()));
        }
    }
    Ok(out)
}

fn describe_difference<'a>(
    left_name: &str,
    left: impl Iterator<Item = &'a str>,
    right_name: &str,
    right: impl Iterator<Item = &'a str>,
) -> Option<String> {
    let l: BTreeSet<&str> = left.collect();
    let r: BTreeSet<&str> = right.collect();
    let only_l: Vec<_> = l.difference(&r).take(5).collect();
    let only_r: Vec<_> = r.difference(&l).take(5).collect();
    if only_l.is_empty() && only_r.is_empty() {
        return None;
    }
    let mut parts = Vec::new();
    if !only_l.is_empty() {
        parts.push(format!("missing from {right_name}: {only_l:?}"));
    }
    if !only_r.is_empty() {
        parts.push(format!("missing from {left_name}: {only_r:?}"));
    }
    Some(parts.join("; "))
}

fn check_split(a: &LogProbRecord, b: &LogProbRecord) -> Result<(), LogProbError> {
    if (a.ell, a.length) != (b.ell, b.length) {
        return Err(LogProbError::InconsistentSplit {
            sample_id: a.sample_id.clone(),
            detail: format!(
                "{} has (ell={}, L={}) but {} has (ell={}, L={})",
                a.role, a.ell, a.length, b.role, b.ell, b.length
            ),
        });
    }
    Ok(())
}

/// Groups records by sample and checks that every role covers the same
/// samples with the same `(ell, L)`. Shuffled records must follow the
/// manifest when one is given.
pub fn join_for_estimation<'a>(
    conditional: &'a [LogProbRecord],
    marginal: Option<&'a [LogProbRecord]>,
    shuffled: Option<&'a [LogProbRecord]>,
    manifest: Option<&ShuffleManifest>,
) -> Result<AlignedDataset<'a>, LogProbError> {
    let cond = index_by_id(conditional, Role::Conditional)?;
    let marg = marginal.map(|m| index_by_id(m, Role::Marginal)).transpose()?;
    let shuf = shuffled
        .map(|s| index_by_id(s, Role::ShuffledConditional))
        .transpose()?;

    if let Some(m) = &marg {
        if let Some(d) = describe_difference("conditional", cond.keys().copied(), "marginal", m.keys().copied()) {
            return Err(LogProbError::SampleSetMismatch(d));
        }
    }
    if let Some(s) = &shuf {
        if let Some(d) = describe_difference("conditional", cond.keys().copied(), "shuffled", s.keys().copied()) {
            return Err(LogProbError::SampleSetMismatch(d));
        }
        let partners = s.values().filter_map(|r| r.partner_id.as_deref());
        if let Some(d) = describe_difference("conditional", cond.keys().copied(), "shuffled partners", partners) {
            return Err(LogProbError::SampleSetMismatch(d));
        }
    }
    if let Some(man) = manifest {
        man.check()?;
        let pairs = man.partner_of();
        if let Some(d) = describe_difference("conditional", cond.keys().copied(), "manifest", pairs.keys().copied()) {
            return Err(LogProbError::SampleSetMismatch(d));
        }
        if let Some(s) = &shuf {
            for (id, r) in s {
                let want = pairs.get(id).copied();
                if r.partner_id.as_deref() != want {
                    return Err(LogProbError::SampleSetMismatch(format!(
                        "shuffled record {id:?} pairs with {:?} but the manifest says {want:?}",
                        r.partner_id
                    )));
                }
            }
        }
    }

    let mut samples = Vec::with_capacity(cond.len());
    for (&id, &c) in &cond {
        let m = marg.as_ref().map(|m| m[id]);
        let s = shuf.as_ref().map(|s| s[id]);
        if let Some(m) = m {
            check_split(c, m)?;
        }
        if let Some(s) = s {
            check_split(c, s)?;
        }
        samples.push(AlignedSample {
            sample_id: id,
            ell: c.ell,
            length: c.length,
            conditional: c,
            marginal: m,
            shuffled: s,
        });
    }
    Ok(AlignedDataset { samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, role: Role, ell: usize, len: usize) -> LogProbRecord {
        let n = len - ell;
        LogProbRecord::new(id, role, ell, len, vec![1; n], vec![-1.0; n])
    }

    fn lines(recs: &[LogProbRecord]) -> Vec<u8> {
        let mut buf = Vec::new();
        write_records(recs, &mut buf).unwrap();
        buf
    }

    #[test]
    fn well_formed_file_validates() {
        let buf = lines(&[rec("a", Role::Conditional, 2, 4), rec("a", Role::Marginal, 2, 4)]);
        let r = validate(&buf[..]).unwrap();
        assert!(r.is_valid(), "{:?}", r.violations);
        assert_eq!(r.role_counts[&Role::Conditional], 1);
        assert_eq!(r.role_counts[&Role::Marginal], 1);
    }

    #[test]
    fn positive_logprob_is_reported_with_line() {
        let mut recs: Vec<_> = (0..7).map(|k| rec(&format!("s{k}"), Role::Conditional, 1, 3)).collect();
        recs[6].logprobs[1] = 0.3;
        let buf = lines(&recs);
        let r = validate(&buf[..]).unwrap();
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].line, 7);
        assert!(r.violations[0].message.contains("positive"));
    }

    #[test]
    fn fixed_point_is_reported() {
        let r = rec("a", Role::ShuffledConditional, 1, 2).with_partner("a");
        let rep = validate(&lines(&[r])[..]).unwrap();
        assert!(rep.violations[0].message.contains("fixed point"));
    }

    #[test]
    fn garbage_and_length_errors_are_reported() {
        let text = "not json\n{\"schema_version\":1,\"sample_id\":\"x\",\"role\":\"marginal\",\"ell\":1,\"L\":3,\"token_ids\":[1],\"logprobs\":[-1]}\n";
        let rep = validate(text.as_bytes()).unwrap();
        let at: Vec<usize> = rep.violations.iter().map(|v| v.line).collect();
        assert_eq!(at, vec![1, 2, 2]);
    }

    #[test]
    fn manifest_of_two_is_a_swap() {
        let m = make_shuffle_manifest(&["b", "a"], 5).unwrap();
        assert_eq!(
            m.pairs,
            vec![
                ShufflePair { sample_id: "a".into(), partner_id: "b".into() },
                ShufflePair { sample_id: "b".into(), partner_id: "a".into() },
            ]
        );
    }

    #[test]
    fn manifest_is_a_deterministic_derangement() {
        let ids: Vec<String> = (0..1000).map(|k| format!("id{k:04}")).collect();
        for seed in 0..5 {
            let m = make_shuffle_manifest(&ids, seed).unwrap();
            m.check().unwrap();
            assert_eq!(m.pairs.len(), 1000);
            assert!(m.pairs.iter().all(|p| p.sample_id != p.partner_id));
            assert_eq!(m, make_shuffle_manifest(&ids, seed).unwrap());
        }
        assert!(matches!(make_shuffle_manifest(&["only"], 1), Err(LogProbError::TooFewSamples(1))));
        assert!(matches!(make_shuffle_manifest(&["a", "a"], 1), Err(LogProbError::DuplicateSample(_))));
    }

    #[test]
    fn join_full_triple() {
        let ids = ["a", "b", "c"];
        let cond: Vec<_> = ids.iter().map(|i| rec(i, Role::Conditional, 2, 5)).collect();
        let marg: Vec<_> = ids.iter().map(|i| rec(i, Role::Marginal, 2, 5)).collect();
        let man = make_shuffle_manifest(&ids, 11).unwrap();
        let partners = man.partner_of();
        let shuf: Vec<_> = ids
            .iter()
            .map(|i| rec(i, Role::ShuffledConditional, 2, 5).with_partner(partners[i]))
            .collect();
        let d = join_for_estimation(&cond, Some(&marg), Some(&shuf), Some(&man)).unwrap();
        assert_eq!(d.len(), 3);
        assert!(d.samples.iter().all(|s| s.marginal.is_some() && s.shuffled.is_some()));
    }

    #[test]
    fn join_names_missing_sample() {
        let cond = vec![rec("a", Role::Conditional, 1, 3), rec("b", Role::Conditional, 1, 3)];
        let marg = vec![rec("a", Role::Marginal, 1, 3)];
        match join_for_estimation(&cond, Some(&marg), None, None) {
            Err(LogProbError::SampleSetMismatch(msg)) => assert!(msg.contains("\"b\""), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn join_names_inconsistent_split() {
        let cond = vec![rec("a", Role::Conditional, 1, 3), rec("b", Role::Conditional, 1, 3)];
        let marg = vec![rec("a", Role::Marginal, 1, 3), rec("b", Role::Marginal, 1, 4)];
        match join_for_estimation(&cond, Some(&marg), None, None) {
            Err(LogProbError::InconsistentSplit { sample_id, .. }) => assert_eq!(sample_id, "b"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn accepted_by_join_implies_valid() {
        let cond = vec![rec("a", Role::Conditional, 1, 3), rec("b", Role::Conditional, 1, 3)];
        let marg = vec![rec("a", Role::Marginal, 1, 3), rec("b", Role::Marginal, 1, 3)];
        join_for_estimation(&cond, Some(&marg), None, None).unwrap();
        let mut all = cond.clone();
        all.extend(marg);
        assert!(validate(&lines(&all)[..]).unwrap().is_valid());
    }
}
