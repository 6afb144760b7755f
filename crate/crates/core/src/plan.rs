//! Packing plans: the partition of chunks into fixed-length sequences,
//! its line-delimited file format, and materialization into token rows.
//!
//! The plan file is the offline artifact of the pipeline. One record per
//! sequence:
//!
//! ```text
//! {"seq": 0, "items": [{"doc": "a", "start": 0, "end": 8}, ...], "pad": 1}
//! ```
//!
//! A separate materialize pass resolves items against a token-ids corpus
//! and emits fixed-length rows of `L` little-endian 32-bit integers.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Slice};
use crate::{Error, Result};

/// How a plan was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Best-fit-decreasing over the capacity segment tree; `O(N log L)`.
    BfdOptimized,
    /// Reference best-fit-decreasing with an ordered search over bins.
    BfdNaive,
    /// First-fit-decreasing over a bin-indexed segment tree.
    Ffd,
    /// Concatenate all documents, split every `L` tokens.
    Concat,
    /// Exact minimal-bin solver; small instances only.
    Optimal,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::BfdOptimized => "bfd-optimized",
            Method::BfdNaive => "bfd-naive",
            Method::Ffd => "ffd",
            Method::Concat => "concat",
            Method::Optimal => "optimal",
        }
    }

    /// Packing methods place whole chunks; concat cuts the token stream.
    pub fn is_packing(self) -> bool {
        !matches!(self, Method::Concat)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bfd" | "bfd-optimized" => Ok(Method::BfdOptimized),
            "bfd-naive" => Ok(Method::BfdNaive),
            "ffd" => Ok(Method::Ffd),
            "concat" => Ok(Method::Concat),
            "optimal" => Ok(Method::Optimal),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// One training sequence: whole-chunk items in insertion order plus tail
/// padding. `sum(item lengths) + pad == L` for every emitted sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    pub items: Vec<Slice>,
    pub pad: u32,
}

impl Sequence {
    pub fn used_tokens(&self) -> u64 {
        self.items.iter().map(|s| s.len() as u64).sum()
    }
}

/// A complete grouping of a corpus into sequences of length `L`.
///
/// Plans produced by the corpus-level pipeline carry the source corpus
/// fingerprint; report generation refuses plans whose fingerprint does
/// not match the corpus (or reference plan) they are paired with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackingPlan {
    method: Method,
    max_seq_len: u32,
    corpus_fingerprint: Option<u64>,
    sequences: Vec<Sequence>,
    dropped_tokens: u64,
}

impl PackingPlan {
    pub(crate) fn from_parts(
        method: Method,
        max_seq_len: u32,
        sequences: Vec<Sequence>,
        dropped_tokens: u64,
    ) -> Self {
        PackingPlan {
            method,
            max_seq_len,
            corpus_fingerprint: None,
            sequences,
            dropped_tokens,
        }
    }

    /// Stamps the plan with the corpus it was built from.
    pub fn bind(mut self, corpus: &Corpus) -> Self {
        assert_eq!(
            self.max_seq_len,
            corpus.max_seq_len(),
            "plan and corpus disagree on max sequence length"
        );
        self.corpus_fingerprint = Some(corpus.fingerprint());
        self
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn max_seq_len(&self) -> u32 {
        self.max_seq_len
    }

    pub fn corpus_fingerprint(&self) -> Option<u64> {
        self.corpus_fingerprint
    }

    pub fn sequences(&self) -> &[Sequence] {
        &self.sequences
    }

    pub fn num_sequences(&self) -> u64 {
        self.sequences.len() as u64
    }

    pub fn total_padding(&self) -> u64 {
        self.sequences.iter().map(|s| s.pad as u64).sum()
    }

    /// Tokens covered by emitted sequences (excludes padding and any
    /// dropped concat remainder).
    pub fn covered_tokens(&self) -> u64 {
        self.sequences.iter().map(Sequence::used_tokens).sum()
    }

    /// Tokens discarded by `drop_remainder`; zero for packing methods.
    pub fn dropped_tokens(&self) -> u64 {
        self.dropped_tokens
    }

    /// Ensures the plan was built from `corpus`.
    pub fn check_corpus(&self, corpus: &Corpus) -> Result<()> {
        if self.max_seq_len != corpus.max_seq_len() {
            return Err(Error::PlanMismatch(format!(
                "plan max sequence length {} != corpus {}",
                self.max_seq_len,
                corpus.max_seq_len()
            )));
        }
        match self.corpus_fingerprint {
            Some(fp) if fp == corpus.fingerprint() => Ok(()),
            Some(_) => Err(Error::PlanMismatch(
                "plan was built from a different corpus".into(),
            )),
            None => Err(Error::PlanMismatch(
                "plan is not bound to a corpus (chunk-level plans cannot be reported on)".into(),
            )),
        }
    }

    /// Writes the line-delimited plan file. Output is byte-deterministic
    /// for a given plan and corpus.
    pub fn write_jsonl(&self, corpus: &Corpus, mut out: impl Write) -> Result<()> {
        self.check_corpus(corpus)?;
        let mut buf = Vec::with_capacity(256);
        for (seq, sequence) in self.sequences.iter().enumerate() {
            let record = RecordOut {
                seq: seq as u64,
                items: sequence
                    .items
                    .iter()
                    .map(|s| ItemOut {
                        doc: &corpus.doc(s.doc).id,
                        start: s.start,
                        end: s.end,
                    })
                    .collect(),
                pad: sequence.pad,
            };
            buf.clear();
            serde_json::to_writer(&mut buf, &record)
                .expect("plan records serialize infallibly to memory");
            buf.push(b'\n');
            out.write_all(&buf)
                .map_err(|e| Error::io("<plan output>", e))?;
        }
        Ok(())
    }

    /// Reads a plan file back and validates it against `corpus`: ids must
    /// resolve, every sequence must sum to `L` with its padding, and the
    /// slices of each document must tile it exactly (a prefix may be
    /// missing only for concat plans, where `drop_remainder` discards the
    /// stream tail). The result is bound to `corpus`.
    pub fn read_jsonl(
        reader: impl BufRead,
        source_name: &str,
        corpus: &Corpus,
        method: Method,
    ) -> Result<PackingPlan> {
        let max_seq_len = corpus.max_seq_len();
        let by_id = corpus.index_by_id();
        let mut sequences = Vec::new();
        let mut covered = vec![0u64; corpus.len()];
        let mut max_end = vec![0u32; corpus.len()];
        let mut min_start = vec![u32::MAX; corpus.len()];

        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx as u64 + 1;
            let line = line.map_err(|e| Error::io(source_name, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: RecordIn = serde_json::from_str(&line)
                .map_err(|e| Error::parse(source_name, line_no, format!("malformed record: {e}")))?;
            if record.seq != sequences.len() as u64 {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("sequence index {} out of order", record.seq),
                ));
            }
            if record.items.is_empty() {
                return Err(Error::parse(source_name, line_no, "sequence has no items"));
            }
            let mut items = Vec::with_capacity(record.items.len());
            let mut used = 0u64;
            for item in &record.items {
                let &doc = by_id.get(item.doc.as_str()).ok_or_else(|| {
                    Error::parse(
                        source_name,
                        line_no,
                        format!("unknown doc id {:?}", item.doc),
                    )
                })?;
                let doc_len = corpus.doc(doc).length;
                if item.start >= item.end || item.end > doc_len {
                    return Err(Error::parse(
                        source_name,
                        line_no,
                        format!(
                            "slice {}..{} invalid for doc {:?} of length {}",
                            item.start, item.end, item.doc, doc_len
                        ),
                    ));
                }
                let slice = Slice {
                    doc,
                    start: item.start,
                    end: item.end,
                };
                used += slice.len() as u64;
                covered[doc as usize] += slice.len() as u64;
                max_end[doc as usize] = max_end[doc as usize].max(slice.end);
                min_start[doc as usize] = min_start[doc as usize].min(slice.start);
                items.push(slice);
            }
            if used + record.pad as u64 != max_seq_len as u64 {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!(
                        "sequence {}: {} used + {} pad != max sequence length {}",
                        record.seq, used, record.pad, max_seq_len
                    ),
                ));
            }
            sequences.push(Sequence {
                items,
                pad: record.pad,
            });
        }

        let mut dropped_tokens = 0u64;
        for (idx, doc) in corpus.documents().iter().enumerate() {
            let tiles_prefix = covered[idx] == max_end[idx] as u64
                && (covered[idx] == 0 || min_start[idx] == 0);
            if !tiles_prefix {
                return Err(Error::PlanMismatch(format!(
                    "doc {:?}: slices overlap or leave gaps",
                    doc.id
                )));
            }
            let missing = doc.length as u64 - covered[idx];
            if missing > 0 && method.is_packing() {
                return Err(Error::PlanMismatch(format!(
                    "doc {:?}: {} tokens not covered by any sequence",
                    doc.id, missing
                )));
            }
            dropped_tokens += missing;
        }

        Ok(PackingPlan {
            method,
            max_seq_len,
            corpus_fingerprint: Some(corpus.fingerprint()),
            sequences,
            dropped_tokens,
        })
    }
}

/// Resolves a plan against a token-ids corpus and writes one fixed-length
/// row per sequence: exactly `L` little-endian u32 values, item tokens in
/// order followed by `pad_token_id` repeats.
pub fn materialize(
    plan: &PackingPlan,
    corpus: &Corpus,
    pad_token_id: u32,
    mut out: impl Write,
) -> Result<()> {
    plan.check_corpus(corpus)?;
    let mut row: Vec<u8> = Vec::with_capacity(plan.max_seq_len() as usize * 4);
    for sequence in plan.sequences() {
        row.clear();
        for slice in &sequence.items {
            let doc = corpus.doc(slice.doc);
            let tokens = doc.tokens.as_ref().ok_or_else(|| {
                Error::Config(format!(
                    "doc {:?} has no token ids; materialize requires a token-ids corpus",
                    doc.id
                ))
            })?;
            for &token in &tokens[slice.start as usize..slice.end as usize] {
                row.extend_from_slice(&token.to_le_bytes());
            }
        }
        for _ in 0..sequence.pad {
            row.extend_from_slice(&pad_token_id.to_le_bytes());
        }
        debug_assert_eq!(row.len(), plan.max_seq_len() as usize * 4);
        out.write_all(&row)
            .map_err(|e| Error::io("<materialize output>", e))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RecordOut<'a> {
    seq: u64,
    items: Vec<ItemOut<'a>>,
    pad: u32,
}

#[derive(Serialize)]
struct ItemOut<'a> {
    doc: &'a str,
    start: u32,
    end: u32,
}

#[derive(Deserialize)]
struct RecordIn {
    seq: u64,
    items: Vec<ItemIn>,
    pad: u32,
}

#[derive(Deserialize)]
struct ItemIn {
    doc: String,
    start: u32,
    end: u32,
}

#[allow(unused)]
fn _assert_send_sync() {
    fn check<T: Send + Sync>() {}
    check::<PackingPlan>();
    check::<Corpus>();
}
