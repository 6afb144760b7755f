//! Document/chunk domain types and corpus ingestion from line-delimited
//! record files.
//!
//! Input is UTF-8 JSON lines. Lengths-only mode expects
//! `{"id": "...", "length": <int>}`, token-ids mode expects
//! `{"id": "...", "tokens": [<int>, ...]}`. Unknown fields are ignored.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use crate::{Error, Result};

/// Position of a document within its corpus. Chunks and plan slices refer
/// to documents by index; the string id is resolved only at serialization
/// boundaries.
pub type DocIndex = u32;

/// Documents longer than this are rejected at ingestion so offset
/// arithmetic stays within `u32`.
pub const MAX_DOC_LEN: u64 = u32::MAX as u64;

/// How input records are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestMode {
    /// Records carry only a token count. Cheapest; sufficient for packing.
    LengthsOnly,
    /// Records carry the full token-id array; required for `materialize`.
    TokenIds,
}

/// Per-document end-of-document marker. When enabled, every document is
/// accounted one extra trailing token *before* chunking or concatenation,
/// so all grouping strategies see identical totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sentinel {
    Off,
    /// Appended once per document. The token id only matters in
    /// token-ids mode.
    Append { token_id: u32 },
}

impl Sentinel {
    pub fn is_on(self) -> bool {
        matches!(self, Sentinel::Append { .. })
    }

    pub fn extra_tokens(self) -> u32 {
        self.is_on() as u32
    }
}

/// One input document. `length` is the *effective* length: the raw token
/// count plus one if the corpus sentinel is enabled. `tokens` (token-ids
/// mode only) already includes the appended sentinel id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub length: u32,
    pub tokens: Option<Vec<u32>>,
}

/// A contiguous slice of one document, identified by document index and
/// half-open token offsets `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slice {
    pub doc: DocIndex,
    pub start: u32,
    pub end: u32,
}

impl Slice {
    pub fn len(self) -> u32 {
        self.end - self.start
    }

    pub fn is_empty(self) -> bool {
        self.end == self.start
    }
}

/// A chunk produced by minimal segmentation: a slice of at most `L`
/// tokens, with its 0-based ordinal within the parent document. Chunks of
/// one document tile it; all but the last have length exactly `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Chunk {
    pub doc: DocIndex,
    pub index: u32,
    pub start: u32,
    pub end: u32,
}

impl Chunk {
    pub fn len(self) -> u32 {
        self.end - self.start
    }

    pub fn is_empty(self) -> bool {
        self.end == self.start
    }

    pub fn slice(self) -> Slice {
        Slice {
            doc: self.doc,
            start: self.start,
            end: self.end,
        }
    }
}

/// An ordered collection of documents plus the grouping parameters they
/// were ingested under. Order is file order and is significant for the
/// concatenate-then-split baseline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    max_seq_len: u32,
    sentinel: Sentinel,
}

impl Corpus {
    /// Builds a corpus from documents whose fields are already effective
    /// (sentinel accounted). Validates lengths, token counts, and id
    /// uniqueness.
    pub fn new(documents: Vec<Document>, max_seq_len: u32, sentinel: Sentinel) -> Result<Self> {
        validate_params(max_seq_len, sentinel)?;
        let mut seen = HashSet::with_capacity(documents.len());
        for doc in &documents {
            if doc.length == 0 {
                return Err(Error::Config(format!(
                    "document {:?} has zero length",
                    doc.id
                )));
            }
            if let Some(tokens) = &doc.tokens {
                if tokens.len() != doc.length as usize {
                    return Err(Error::Config(format!(
                        "document {:?}: {} tokens but declared length {}",
                        doc.id,
                        tokens.len(),
                        doc.length
                    )));
                }
            }
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::Config(format!("duplicate doc id {:?}", doc.id)));
            }
        }
        Ok(Corpus {
            documents,
            max_seq_len,
            sentinel,
        })
    }

    /// Test/benchmark helper: a lengths-only corpus with generated ids
    /// (`d0`, `d1`, ...). Lengths are taken as effective.
    pub fn from_lengths(lengths: &[u32], max_seq_len: u32) -> Result<Self> {
        let documents = lengths
            .iter()
            .enumerate()
            .map(|(i, &length)| Document {
                id: format!("d{i}"),
                length,
                tokens: None,
            })
            .collect();
        Corpus::new(documents, max_seq_len, Sentinel::Off)
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn doc(&self, idx: DocIndex) -> &Document {
        &self.documents[idx as usize]
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn max_seq_len(&self) -> u32 {
        self.max_seq_len
    }

    pub fn sentinel(&self) -> Sentinel {
        self.sentinel
    }

    /// Total effective token count.
    pub fn total_tokens(&self) -> u64 {
        self.documents.iter().map(|d| d.length as u64).sum()
    }

    /// Effective document lengths in corpus order.
    pub fn lengths(&self) -> impl Iterator<Item = u32> + '_ {
        self.documents.iter().map(|d| d.length)
    }

    /// Maps each effective length to the number of documents of that
    /// length.
    pub fn length_histogram(&self) -> BTreeMap<u32, u64> {
        let mut hist = BTreeMap::new();
        for doc in &self.documents {
            *hist.entry(doc.length).or_insert(0u64) += 1;
        }
        hist
    }

    /// Content digest used to tie plans back to the corpus they were
    /// built from (FNV-1a over ids and effective lengths).
    pub fn fingerprint(&self) -> u64 {
        const OFFSET: u64 = 0xcbf29ce484222325;
        const PRIME: u64 = 0x100000001b3;
        let mut hash = OFFSET;
        let mut eat = |byte: u8| {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(PRIME);
        };
        for doc in &self.documents {
            for &b in doc.id.as_bytes() {
                eat(b);
            }
            eat(0xff);
            for b in doc.length.to_le_bytes() {
                eat(b);
            }
        }
        hash
    }

    /// Lookup table from string id to document index.
    pub fn index_by_id(&self) -> HashMap<&str, DocIndex> {
        self.documents
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.as_str(), i as DocIndex))
            .collect()
    }
}

fn validate_params(max_seq_len: u32, sentinel: Sentinel) -> Result<()> {
    if max_seq_len == 0 {
        return Err(Error::Config("max sequence length must be >= 1".into()));
    }
    if sentinel.is_on() && max_seq_len < 2 {
        return Err(Error::Config(
            "max sequence length must be >= 2 when a sentinel token is appended".into(),
        ));
    }
    Ok(())
}

#[derive(Deserialize)]
struct LineRecord {
    id: String,
    length: Option<u64>,
    tokens: Option<Vec<u32>>,
}

/// Reads a corpus from a line-delimited record file. Documents keep file
/// order; the sentinel, when enabled, is folded into each document's
/// effective length (and appended to its token array in token-ids mode).
pub fn load_corpus(
    path: impl AsRef<Path>,
    mode: IngestMode,
    max_seq_len: u32,
    sentinel: Sentinel,
) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(
        BufReader::new(file),
        &path.display().to_string(),
        mode,
        max_seq_len,
        sentinel,
    )
}

/// [`load_corpus`] over any buffered reader; `source_name` labels parse
/// errors.
pub fn read_corpus(
    reader: impl BufRead,
    source_name: &str,
    mode: IngestMode,
    max_seq_len: u32,
    sentinel: Sentinel,
) -> Result<Corpus> {
    validate_params(max_seq_len, sentinel)?;
    let mut documents = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line.map_err(|e| Error::io(source_name, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LineRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(source_name, line_no, format!("malformed record: {e}")))?;
        let doc = document_from_record(record, mode, sentinel)
            .map_err(|reason| Error::parse(source_name, line_no, reason))?;
        if !seen.insert(doc.id.clone()) {
            return Err(Error::parse(
                source_name,
                line_no,
                format!("duplicate doc id {:?}", doc.id),
            ));
        }
        documents.push(doc);
    }
    // Invariants were enforced line by line; assemble directly.
    Ok(Corpus {
        documents,
        max_seq_len,
        sentinel,
    })
}

fn document_from_record(
    record: LineRecord,
    mode: IngestMode,
    sentinel: Sentinel,
) -> std::result::Result<Document, String> {
    let raw_length = match mode {
        IngestMode::LengthsOnly => record
            .length
            .ok_or_else(|| format!("doc {:?}: missing \"length\" field", record.id))?,
        IngestMode::TokenIds => {
            let tokens = record
                .tokens
                .as_ref()
                .ok_or_else(|| format!("doc {:?}: missing \"tokens\" field", record.id))?;
            let n = tokens.len() as u64;
            if let Some(declared) = record.length {
                if declared != n {
                    return Err(format!(
                        "doc {:?}: {} tokens but declared length {}",
                        record.id, n, declared
                    ));
                }
            }
            n
        }
    };
    if raw_length == 0 {
        return Err(format!("doc {:?}: zero length", record.id));
    }
    let effective = raw_length + sentinel.extra_tokens() as u64;
    if effective > MAX_DOC_LEN {
        return Err(format!(
            "doc {:?}: effective length {} exceeds cap {}",
            record.id, effective, MAX_DOC_LEN
        ));
    }
    let tokens = match mode {
        IngestMode::LengthsOnly => None,
        IngestMode::TokenIds => {
            let mut tokens = record.tokens.expect("checked above");
            if let Sentinel::Append { token_id } = sentinel {
                tokens.push(token_id);
            }
            Some(tokens)
        }
    };
    Ok(Document {
        id: record.id,
        length: effective as u32,
        tokens,
    })
}
