//! Token corpora and unigram / pair counting.
//!
//! Counting is exact integer accumulation, so any sharding of the documents
//! followed by a merge yields the same table as a sequential pass.

mod format;

pub use format::{
    read_documents, read_real_rows, write_binary, write_jsonl, write_real_rows, BinaryDocuments,
    CorpusFormat, JsonlDocuments, NGC_MAGIC, NGF_MAGIC,
};

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::entropy::{pack_pair, Arity, CountTable};

#[derive(Debug, Error)]
pub enum NgramError {
    #[error("corpus has no documents")]
    EmptyCorpus,
    #[error("malformed document at {location}: {reason}")]
    MalformedDocument { location: String, reason: String },
    #[error("token {token} in document {doc_id} exceeds the vocabulary bound {bound}")]
    TokenOutOfVocabulary { doc_id: String, token: u32, bound: u32 },
    #[error("distance must be at least 1")]
    ZeroDistance,
    #[error("segment {index} has {len} tokens, need at least 2")]
    SegmentTooShort { index: usize, len: usize },
    #[error("malformed corpus file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn id_width(count: usize) -> usize {
    count.saturating_sub(1).to_string().len()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub tokens: Vec<u32>,
}

/// In-memory corpus of non-empty token documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenCorpus {
    documents: Vec<Document>,
    vocab_bound: Option<u32>,
}

impl TokenCorpus {
    pub fn from_documents<I>(docs: I) -> Result<Self, NgramError>
    where
        I: IntoIterator<Item = Result<Document, NgramError>>,
    {
        let documents = docs.into_iter().collect::<Result<Vec<_>, _>>()?;
        Self::new(documents)
    }

    pub fn new(documents: Vec<Document>) -> Result<Self, NgramError> {
        if let Some(d) = documents.iter().find(|d| d.tokens.is_empty()) {
            return Err(NgramError::MalformedDocument {
                location: format!("document {}", d.doc_id),
                reason: "document has no tokens".into(),
            });
        }
        Ok(Self {
            documents,
            vocab_bound: None,
        })
    }

    /// Wraps bare token lists, naming documents by zero-padded index.
    pub fn from_token_lists(lists: Vec<Vec<u32>>) -> Result<Self, NgramError> {
        let width = id_width(lists.len());
        Self::new(
            lists
                .into_iter()
                .enumerate()
                .map(|(i, tokens)| Document {
                    doc_id: format!("{i:0width$}"),
                    tokens,
                })
                .collect(),
        )
    }

    /// Declares an exclusive upper bound on token ids and checks every token.
    pub fn with_vocab_bound(mut self, bound: u32) -> Result<Self, NgramError> {
        for d in &self.documents {
            if let Some(&t) = d.tokens.iter().find(|&&t| t >= bound) {
                return Err(NgramError::TokenOutOfVocabulary {
                    doc_id: d.doc_id.clone(),
                    token: t,
                    bound,
                });
            }
        }
        self.vocab_bound = Some(bound);
        Ok(self)
    }

    pub fn vocab_bound(&self) -> Option<u32> {
        self.vocab_bound
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.documents.iter().map(|d| d.tokens.len()).sum()
    }
}

fn count_par<F>(docs: &[Document], arity: Arity, emit: F) -> CountTable
where
    F: Fn(&[u32], &mut dyn FnMut(u64)) + Sync,
{
    let merged = docs
        .par_iter()
        .fold(HashMap::<u64, u64>::new, |mut acc, d| {
            emit(&d.tokens, &mut |k| *acc.entry(k).or_insert(0) += 1);
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, c) in b {
                *a.entry(k).or_insert(0) += c;
            }
            a
        });
    CountTable::from_counts(arity, merged)
}

/// Histogram of token ids over every position of every document.
pub fn count_unigrams(corpus: &TokenCorpus) -> Result<CountTable, NgramError> {
    if corpus.is_empty() {
        return Err(NgramError::EmptyCorpus);
    }
    Ok(count_par(corpus.documents(), Arity::Unigram, |toks, emit| {
        for &t in toks {
            emit(u64::from(t));
        }
    }))
}

/// Histogram of within-document ordered pairs `(w_i, w_{i+d})`.
///
/// Documents with at most `d` tokens contribute nothing; an empty result is
/// returned as an empty table with a logged warning.
pub fn count_pairs_at_distance(corpus: &TokenCorpus, d: usize) -> Result<CountTable, NgramError> {
    if d == 0 {
        return Err(NgramError::ZeroDistance);
    }
    if corpus.is_empty() {
        return Err(NgramError::EmptyCorpus);
    }
    let table = count_par(corpus.documents(), Arity::Pair, |toks, emit| {
        for (a, b) in toks.iter().zip(toks.iter().skip(d)) {
            emit(pack_pair(*a, *b));
        }
    });
    if table.is_empty() {
        log::warn!("no document is longer than distance {d}; pair table is empty");
    }
    Ok(table)
}

/// One `(y₁, y₂)` pair per segment.
pub fn count_segment_leading_pairs<S: AsRef<[u32]>>(segments: &[S]) -> Result<CountTable, NgramError> {
    let mut table = CountTable::new(Arity::Pair);
    for (index, s) in segments.iter().enumerate() {
        let s = s.as_ref();
        if s.len() < 2 {
            return Err(NgramError::SegmentTooShort {
                index,
                len: s.len(),
            });
        }
        table.increment(pack_pair(s[0], s[1]));
    }
    Ok(table)
}

/// Streaming accumulator: feed documents one at a time and collect the
/// unigram table plus pair tables at several distances in one pass.
#[derive(Debug, Clone)]
pub struct StreamingCounter {
    unigrams: CountTable,
    distances: Vec<usize>,
    pairs: Vec<CountTable>,
    documents: usize,
}

impl StreamingCounter {
    pub fn new(distances: &[usize]) -> Result<Self, NgramError> {
        if distances.contains(&0) {
            return Err(NgramError::ZeroDistance);
        }
        Ok(Self {
            unigrams: CountTable::new(Arity::Unigram),
            distances: distances.to_vec(),
            pairs: distances.iter().map(|_| CountTable::new(Arity::Pair)).collect(),
            documents: 0,
        })
    }

    pub fn observe(&mut self, tokens: &[u32]) {
        self.documents += 1;
        for &t in tokens {
            self.unigrams.increment(u64::from(t));
        }
        for (d, table) in self.distances.iter().zip(self.pairs.iter_mut()) {
            for (a, b) in tokens.iter().zip(tokens.iter().skip(*d)) {
                table.increment(pack_pair(*a, *b));
            }
        }
    }

    pub fn documents(&self) -> usize {
        self.documents
    }

    /// Returns the unigram table and `(distance, pair table)` for each
    /// requested distance.
    pub fn finish(self) -> Result<(CountTable, Vec<(usize, CountTable)>), NgramError> {
        if self.documents == 0 {
            return Err(NgramError::EmptyCorpus);
        }
        Ok((
            self.unigrams,
            self.distances.into_iter().zip(self.pairs).collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::unpack_pair;
    use proptest::prelude::*;

    fn corpus(lists: Vec<Vec<u32>>) -> TokenCorpus {
        TokenCorpus::from_token_lists(lists).unwrap()
    }

    #[test]
    fn unigram_example() {
        let t = count_unigrams(&corpus(vec![vec![7, 7, 9]])).unwrap();
        assert_eq!(t.get(7), 2);
        assert_eq!(t.get(9), 1);
        assert_eq!(t.total(), 3);
    }

    #[test]
    fn pair_examples() {
        let c = corpus(vec![vec![1, 2, 3]]);
        let t = count_pairs_at_distance(&c, 1).unwrap();
        let got: Vec<_> = t.iter().map(|(k, n)| (unpack_pair(k), n)).collect();
        assert_eq!(got, vec![((1, 2), 1), ((2, 3), 1)]);
        let far = count_pairs_at_distance(&c, 5).unwrap();
        assert!(far.is_empty());
        assert!(matches!(count_pairs_at_distance(&c, 0), Err(NgramError::ZeroDistance)));
    }

    #[test]
    fn empty_corpus_errors() {
        let c = TokenCorpus::new(vec![]).unwrap();
        assert!(matches!(count_unigrams(&c), Err(NgramError::EmptyCorpus)));
        assert!(matches!(count_pairs_at_distance(&c, 1), Err(NgramError::EmptyCorpus)));
    }

    #[test]
    fn empty_document_is_malformed() {
        assert!(matches!(
            TokenCorpus::from_token_lists(vec![vec![1], vec![]]),
            Err(NgramError::MalformedDocument { .. })
        ));
    }

    #[test]
    fn vocab_bound_is_enforced() {
        let c = corpus(vec![vec![1, 2, 9]]);
        assert!(matches!(
            c.clone().with_vocab_bound(9),
            Err(NgramError::TokenOutOfVocabulary { token: 9, .. })
        ));
        assert_eq!(c.with_vocab_bound(10).unwrap().vocab_bound(), Some(10));
    }

    #[test]
    fn leading_pairs() {
        let t = count_segment_leading_pairs(&[vec![5, 6, 9], vec![5, 6]]).unwrap();
        assert_eq!(t.get(pack_pair(5, 6)), 2);
        assert_eq!(t.total(), 2);
        assert!(matches!(
            count_segment_leading_pairs(&[vec![5, 6], vec![1]]),
            Err(NgramError::SegmentTooShort { index: 1, len: 1 })
        ));
    }

    #[test]
    fn streaming_matches_batch() {
        let lists = vec![vec![1, 2, 3, 1, 2], vec![4, 4], vec![2, 1, 2, 1, 2, 1]];
        let c = corpus(lists.clone());
        let mut s = StreamingCounter::new(&[1, 3]).unwrap();
        for l in &lists {
            s.observe(l);
        }
        let (uni, pairs) = s.finish().unwrap();
        assert_eq!(uni, count_unigrams(&c).unwrap());
        assert_eq!(pairs[0].1, count_pairs_at_distance(&c, 1).unwrap());
        assert_eq!(pairs[1].1, count_pairs_at_distance(&c, 3).unwrap());
    }

    proptest! {
        #[test]
        fn shard_merge_equals_sequential(
            lists in proptest::collection::vec(proptest::collection::vec(0u32..6, 1..12), 1..20),
            cut in 0usize..20,
            d in 1usize..5,
        ) {
            let cut = cut.min(lists.len());
            let whole = corpus(lists.clone());
            let (a, b) = lists.split_at(cut);
            let mut uni = CountTable::new(Arity::Unigram);
            let mut pairs = CountTable::new(Arity::Pair);
            for part in [a, b] {
                if part.is_empty() { continue; }
                let c = corpus(part.to_vec());
                uni.merge(&count_unigrams(&c).unwrap()).unwrap();
                pairs.merge(&count_pairs_at_distance(&c, d).unwrap()).unwrap();
            }
            prop_assert_eq!(&uni, &count_unigrams(&whole).unwrap());
            prop_assert_eq!(&pairs, &count_pairs_at_distance(&whole, d).unwrap());
            let expect_total: usize = lists.iter().map(|l| l.len().saturating_sub(d)).sum();
            prop_assert_eq!(pairs.total() as usize, expect_total);
            prop_assert!(pairs.distinct() as u64 <= pairs.total());
        }
    }
}
