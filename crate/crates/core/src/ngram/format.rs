//! Corpus file formats.
//!
//! * JSONL: one `{"doc_id": "...", "tokens": [..]}` object per line.
//! * `NGC1` binary: magic, `u32` document count, then per document a `u64`
//!   length followed by little-endian `u32` token ids.
//! * `NGF1` binary (real-valued rows, e.g. Gaussian samples): magic, `u32`
//!   row count, then per row a `u64` length followed by little-endian `f64`.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use serde::{Deserialize, Serialize};

use super::{id_width, Document, NgramError, TokenCorpus};

pub const NGC_MAGIC: &[u8; 4] = b"NGC1";
pub const NGF_MAGIC: &[u8; 4] = b"NGF1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Binary,
}

impl CorpusFormat {
    /// Sniffs the format from the first bytes of a file.
    pub fn detect(head: &[u8]) -> Self {
        if head.starts_with(NGC_MAGIC) {
            CorpusFormat::Binary
        } else {
            CorpusFormat::Jsonl
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonDoc {
    doc_id: String,
    tokens: Vec<i64>,
}

#[derive(Serialize)]
struct JsonDocOut<'a> {
    doc_id: &'a str,
    tokens: &'a [u32],
}

/// Streams documents out of a JSONL corpus, one per non-blank line.
pub struct JsonlDocuments<R> {
    lines: std::io::Lines<BufReader<R>>,
    line_no: usize,
}

impl<R: Read> JsonlDocuments<R> {
    pub fn new(input: R) -> Self {
        Self {
            lines: BufReader::new(input).lines(),
            line_no: 0,
        }
    }
}

impl<R: Read> Iterator for JsonlDocuments<R> {
    type Item = Result<Document, NgramError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let line_no = self.line_no;
            let malformed = |reason: String| NgramError::MalformedDocument {
                location: format!("line {line_no}"),
                reason,
            };
            let doc: JsonDoc = match serde_json::from_str(&line) {
                Ok(d) => d,
                Err(e) => return Some(Err(malformed(e.to_string()))),
            };
            let mut tokens = Vec::with_capacity(doc.tokens.len());
            for t in doc.tokens {
                match u32::try_from(t) {
                    Ok(v) => tokens.push(v),
                    Err(_) => return Some(Err(malformed(format!("token {t} is not a u32 id")))),
                }
            }
            if tokens.is_empty() {
                return Some(Err(malformed("document has no tokens".into())));
            }
            return Some(Ok(Document {
                doc_id: doc.doc_id,
                tokens,
            }));
        }
    }
}

/// Streams documents out of an `NGC1` corpus. Document ids are synthesized
/// as zero-padded indices.
pub struct BinaryDocuments<R> {
    reader: BufReader<R>,
    remaining: u32,
    index: u32,
    width: usize,
}

impl<R: Read> BinaryDocuments<R> {
    pub fn new(input: R) -> Result<Self, NgramError> {
        let mut reader = BufReader::new(input);
        let mut magic = [0u8; 4];
        reader.read_exact(&mut magic)?;
        if &magic != NGC_MAGIC {
            return Err(NgramError::Format(format!("bad magic {magic:?}")));
        }
        let mut b4 = [0u8; 4];
        reader.read_exact(&mut b4)?;
        let count = u32::from_le_bytes(b4);
        Ok(Self {
            reader,
            remaining: count,
            index: 0,
            width: id_width(count as usize),
        })
    }
}

impl<R: Read> Iterator for BinaryDocuments<R> {
    type Item = Result<Document, NgramError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let idx = self.index;
        self.index += 1;
        let truncated = || NgramError::Format(format!("truncated in document {idx}"));
        let mut b8 = [0u8; 8];
        if self.reader.read_exact(&mut b8).is_err() {
            return Some(Err(truncated()));
        }
        let len = u64::from_le_bytes(b8);
        if len == 0 {
            return Some(Err(NgramError::MalformedDocument {
                location: format!("document {idx}"),
                reason: "document has no tokens".into(),
            }));
        }
        let Ok(len) = usize::try_from(len) else {
            return Some(Err(truncated()));
        };
        let mut tokens = Vec::with_capacity(len.min(1 << 24));
        let mut b4 = [0u8; 4];
        for _ in 0..len {
            if self.reader.read_exact(&mut b4).is_err() {
                return Some(Err(truncated()));
            }
            tokens.push(u32::from_le_bytes(b4));
        }
        Some(Ok(Document {
            doc_id: format!("{:0width$}", idx, width = self.width),
            tokens,
        }))
    }
}

/// Opens a corpus of either format, sniffing the magic bytes.
pub fn read_documents<R: Read + 'static>(
    input: R,
) -> Result<Box<dyn Iterator<Item = Result<Document, NgramError>>>, NgramError> {
    let mut reader = BufReader::new(input);
    let head = reader.fill_buf()?.to_vec();
    Ok(match CorpusFormat::detect(&head) {
        CorpusFormat::Binary => Box::new(BinaryDocuments::new(reader)?),
        CorpusFormat::Jsonl => Box::new(JsonlDocuments::new(reader)),
    })
}

pub fn write_jsonl<W: Write>(corpus: &TokenCorpus, out: W) -> Result<(), NgramError> {
    let mut w = BufWriter::new(out);
    for doc in corpus.documents() {
        serde_json::to_writer(
            &mut w,
            &JsonDocOut {
                doc_id: &doc.doc_id,
                tokens: &doc.tokens,
            },
        )
        .map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_binary<W: Write>(corpus: &TokenCorpus, out: W) -> Result<(), NgramError> {
    let docs = corpus.documents();
    let count = u32::try_from(docs.len())
        .map_err(|_| NgramError::Format(format!("{} documents exceed u32", docs.len())))?;
    let mut w = BufWriter::new(out);
    w.write_all(NGC_MAGIC)?;
    w.write_all(&count.to_le_bytes())?;
    for doc in docs {
        w.write_all(&(doc.tokens.len() as u64).to_le_bytes())?;
        for t in &doc.tokens {
            w.write_all(&t.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes real-valued rows in the `NGF1` layout.
pub fn write_real_rows<W: Write>(rows: &[Vec<f64>], out: W) -> Result<(), NgramError> {
    let count = u32::try_from(rows.len())
        .map_err(|_| NgramError::Format(format!("{} rows exceed u32", rows.len())))?;
    let mut w = BufWriter::new(out);
    w.write_all(NGF_MAGIC)?;
    w.write_all(&count.to_le_bytes())?;
    for row in rows {
        w.write_all(&(row.len() as u64).to_le_bytes())?;
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_real_rows<R: Read>(input: R) -> Result<Vec<Vec<f64>>, NgramError> {
    let mut r = BufReader::new(input);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != NGF_MAGIC {
        return Err(NgramError::Format(format!("bad magic {magic:?}")));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let count = u32::from_le_bytes(b4);
    let mut rows = Vec::with_capacity(count as usize);
    let mut b8 = [0u8; 8];
    for i in 0..count {
        let bad = |_| NgramError::Format(format!("truncated in row {i}"));
        r.read_exact(&mut b8).map_err(bad)?;
        let len = u64::from_le_bytes(b8) as usize;
        let mut row = Vec::with_capacity(len.min(1 << 24));
        for _ in 0..len {
            r.read_exact(&mut b8).map_err(bad)?;
            row.push(f64::from_le_bytes(b8));
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> TokenCorpus {
        TokenCorpus::from_token_lists(vec![vec![7, 7, 9], vec![u32::MAX, 0], vec![1]]).unwrap()
    }

    #[test]
    fn jsonl_and_binary_convert_losslessly() {
        let c = corpus();
        let mut bin = Vec::new();
        write_binary(&c, &mut bin).unwrap();
        let from_bin = TokenCorpus::from_documents(read_documents(std::io::Cursor::new(bin.clone())).unwrap()).unwrap();
        assert_eq!(from_bin, c);
        let mut js = Vec::new();
        write_jsonl(&from_bin, &mut js).unwrap();
        let text = String::from_utf8(js.clone()).unwrap();
        assert!(text.starts_with("{\"doc_id\":\"0\",\"tokens\":[7,7,9]}\n"));
        let from_js = TokenCorpus::from_documents(read_documents(std::io::Cursor::new(js)).unwrap()).unwrap();
        let mut bin2 = Vec::new();
        write_binary(&from_js, &mut bin2).unwrap();
        assert_eq!(bin, bin2);
    }

    #[test]
    fn jsonl_reports_line_of_bad_token() {
        let text = "{\"doc_id\":\"a\",\"tokens\":[1,2]}\n\n{\"doc_id\":\"b\",\"tokens\":[-3]}\n";
        let err = TokenCorpus::from_documents(JsonlDocuments::new(text.as_bytes())).unwrap_err();
        match err {
            NgramError::MalformedDocument { location, .. } => assert_eq!(location, "line 3"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn real_rows_round_trip() {
        let rows = vec![vec![0.5, -1.25], vec![3.0]];
        let mut buf = Vec::new();
        write_real_rows(&rows, &mut buf).unwrap();
        assert_eq!(read_real_rows(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn padded_ids() {
        assert_eq!(id_width(1), 1);
        assert_eq!(id_width(10), 1);
        assert_eq!(id_width(11), 2);
        assert_eq!(id_width(1000), 3);
    }
}
