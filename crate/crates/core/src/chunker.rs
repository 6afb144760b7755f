//! Minimal segmentation of documents into chunks of at most `L` tokens
//! (step 1 of the pipeline), plus the truncation accounting it induces.

use std::collections::BTreeMap;

use crate::corpus::{Chunk, Corpus, DocIndex};

/// The chunks of a corpus together with per-document cut counts. A
/// document of effective length `l` yields `ceil(l / L)` chunks and
/// `ceil(l / L) - 1` cuts; every chunk except possibly the last per
/// document has length exactly `L`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkSet {
    chunks: Vec<Chunk>,
    cuts_per_doc: Vec<u32>,
}

impl ChunkSet {
    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn into_chunks(self) -> Vec<Chunk> {
        self.chunks
    }

    /// Cut counts indexed by document position.
    pub fn cuts_per_doc(&self) -> &[u32] {
        &self.cuts_per_doc
    }

    pub fn cuts_for(&self, doc: DocIndex) -> u32 {
        self.cuts_per_doc[doc as usize]
    }

    pub fn total_cuts(&self) -> u64 {
        self.cuts_per_doc.iter().map(|&c| c as u64).sum()
    }

    pub fn num_chunks(&self) -> usize {
        self.chunks.len()
    }
}

/// Segments every document of `corpus` into maximal chunks: repeated
/// `L`-token prefixes plus a final remainder. This is the fewest cuts any
/// contiguous segmentation with pieces of at most `L` tokens can make.
pub fn chunk_corpus(corpus: &Corpus) -> ChunkSet {
    let lengths: Vec<u32> = corpus.lengths().collect();
    chunk_lengths(&lengths, corpus.max_seq_len())
}

/// [`chunk_corpus`] over bare effective lengths; document indices are the
/// positions in `lengths`. Used directly by benchmarks, where documents
/// never need ids.
pub fn chunk_lengths(lengths: &[u32], max_seq_len: u32) -> ChunkSet {
    assert!(max_seq_len >= 1, "max sequence length must be >= 1");
    let mut chunks = Vec::with_capacity(lengths.len());
    let mut cuts_per_doc = Vec::with_capacity(lengths.len());
    for (doc, &length) in lengths.iter().enumerate() {
        debug_assert!(length >= 1, "documents cannot be empty");
        let doc = doc as DocIndex;
        let mut start = 0u32;
        let mut index = 0u32;
        while start < length {
            let end = start.saturating_add(max_seq_len).min(length);
            chunks.push(Chunk {
                doc,
                index,
                start,
                end,
            });
            start = end;
            index += 1;
        }
        cuts_per_doc.push(index - 1);
    }
    ChunkSet {
        chunks,
        cuts_per_doc,
    }
}

/// Aggregates cut counts by effective document length: value at `l` is
/// the total number of cuts over all documents of length `l`. Zero for
/// every `l <= L`; lengths with zero cuts are omitted.
pub fn packing_truncation_histogram(
    chunkset: &ChunkSet,
    corpus: &Corpus,
) -> BTreeMap<u32, u64> {
    assert_eq!(
        chunkset.cuts_per_doc.len(),
        corpus.len(),
        "chunk set does not cover this corpus"
    );
    let mut hist = BTreeMap::new();
    for (doc, &cuts) in corpus.documents().iter().zip(&chunkset.cuts_per_doc) {
        if cuts > 0 {
            *hist.entry(doc.length).or_insert(0u64) += cuts as u64;
        }
    }
    hist
}
