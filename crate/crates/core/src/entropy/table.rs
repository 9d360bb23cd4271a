//! Sparse count tables and their canonical binary encoding.

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Read, Write};

use super::EntropyError;

pub const CTB_MAGIC: &[u8; 4] = b"CTB1";

/// Whether keys are single token ids or packed ordered pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arity {
    Unigram,
    Pair,
}

impl Arity {
    fn code(self) -> u8 {
        match self {
            Arity::Unigram => 1,
            Arity::Pair => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            1 => Some(Arity::Unigram),
            2 => Some(Arity::Pair),
            _ => None,
        }
    }
}

/// Packs an ordered token pair as `first·2³² + second`.
#[inline]
pub fn pack_pair(first: u32, second: u32) -> u64 {
    (u64::from(first) << 32) | u64::from(second)
}

#[inline]
pub fn unpack_pair(key: u64) -> (u32, u32) {
    ((key >> 32) as u32, key as u32)
}

/// Histogram over 64-bit keys. Every stored count is at least 1 and
/// `total` is the sum of all counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    arity: Arity,
    entries: BTreeMap<u64, u64>,
    total: u64,
}

impl CountTable {
    pub fn new(arity: Arity) -> Self {
        Self {
            arity,
            entries: BTreeMap::new(),
            total: 0,
        }
    }

    /// Builds from `(key, count)` pairs, summing duplicate keys and skipping
    /// zero counts.
    pub fn from_counts<I: IntoIterator<Item = (u64, u64)>>(arity: Arity, counts: I) -> Self {
        let mut t = Self::new(arity);
        for (k, c) in counts {
            t.add(k, c);
        }
        t
    }

    pub fn arity(&self) -> Arity {
        self.arity
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct keys observed.
    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn get(&self, key: u64) -> u64 {
        self.entries.get(&key).copied().unwrap_or(0)
    }

    pub fn max_count(&self) -> u64 {
        self.entries.values().copied().max().unwrap_or(0)
    }

    pub fn add(&mut self, key: u64, count: u64) {
        if count == 0 {
            return;
        }
        *self.entries.entry(key).or_insert(0) += count;
        self.total += count;
    }

    pub fn increment(&mut self, key: u64) {
        self.add(key, 1);
    }

    /// Entries in ascending key order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.entries.iter().map(|(&k, &c)| (k, c))
    }

    pub fn counts(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.values().copied()
    }

    /// Adds every count of `other` into `self`.
    pub fn merge(&mut self, other: &CountTable) -> Result<(), EntropyError> {
        if self.arity != other.arity {
            return Err(EntropyError::ArityMismatch {
                expected: self.arity,
                got: other.arity,
            });
        }
        for (k, c) in other.iter() {
            self.add(k, c);
        }
        Ok(())
    }

    /// Marginal tables of the first and second coordinates of a pair table.
    pub fn coordinate_marginals(&self) -> Result<(CountTable, CountTable), EntropyError> {
        if self.arity != Arity::Pair {
            return Err(EntropyError::ArityMismatch {
                expected: Arity::Pair,
                got: self.arity,
            });
        }
        let mut first = CountTable::new(Arity::Unigram);
        let mut second = CountTable::new(Arity::Unigram);
        for (k, c) in self.iter() {
            let (a, b) = unpack_pair(k);
            first.add(u64::from(a), c);
            second.add(u64::from(b), c);
        }
        Ok((first, second))
    }

    /// Canonical encoding: magic `CTB1`, arity `u8`, entry count `u64`, then
    /// `(key u64, count u64)` sorted by key, all little-endian.
    pub fn write_to<W: Write>(&self, out: W) -> Result<(), EntropyError> {
        let mut w = BufWriter::new(out);
        w.write_all(CTB_MAGIC)?;
        w.write_all(&[self.arity.code()])?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for (k, c) in self.iter() {
            w.write_all(&k.to_le_bytes())?;
            w.write_all(&c.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Decodes and revalidates: keys strictly ascending, counts ≥ 1, total
    /// recomputed from the entries.
    pub fn read_from<R: Read>(input: R) -> Result<Self, EntropyError> {
        let mut r = BufReader::new(input);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CTB_MAGIC {
            return Err(EntropyError::Format(format!("bad magic {magic:?}")));
        }
        let mut b1 = [0u8; 1];
        r.read_exact(&mut b1)?;
        let arity = Arity::from_code(b1[0])
            .ok_or_else(|| EntropyError::Format(format!("unknown arity code {}", b1[0])))?;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8);
        let mut table = Self::new(arity);
        let mut last: Option<u64> = None;
        for i in 0..n {
            r.read_exact(&mut b8)
                .map_err(|_| EntropyError::Format(format!("truncated at entry {i} of {n}")))?;
            let key = u64::from_le_bytes(b8);
            r.read_exact(&mut b8)
                .map_err(|_| EntropyError::Format(format!("truncated at entry {i} of {n}")))?;
            let count = u64::from_le_bytes(b8);
            if count == 0 {
                return Err(EntropyError::Format(format!("zero count for key {key}")));
            }
            if last.is_some_and(|l| l >= key) {
                return Err(EntropyError::Format(format!("keys not strictly ascending at entry {i}")));
            }
            if arity == Arity::Unigram && key > u64::from(u32::MAX) {
                return Err(EntropyError::Format(format!("unigram key {key} exceeds 32 bits")));
            }
            last = Some(key);
            table.add(key, count);
        }
        if r.read(&mut b1)? != 0 {
            return Err(EntropyError::Format("trailing bytes".into()));
        }
        Ok(table)
    }
}
