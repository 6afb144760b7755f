//! Measurement reports over plans: compactness (sequence counts and
//! padding), truncation histograms, and packer runtime scaling.
//!
//! Reports serialize to JSON for machines and render as aligned text
//! tables for humans; truncation histograms additionally export CSV
//! (`length,doc_count,truncations`) for plotting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::chunker::chunk_lengths;
use crate::corpus::Corpus;
use crate::packer::{pack_bfd_optimized, pack_ffd};
use crate::plan::{Method, PackingPlan};
use crate::synth::SyntheticSpec;
use crate::{Error, Result};

/// Sequence-count and padding accounting for one plan, optionally with
/// deltas against a concat reference built from the same corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactnessReport {
    pub method: Method,
    pub max_seq_len: u32,
    pub num_sequences: u64,
    pub num_padding_tokens: u64,
    /// `num_padding_tokens / (num_sequences * L)`; in `[0, 1)`.
    pub padding_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_vs_concat: Option<i64>,
    /// Delta as a percentage of the concat sequence count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_pct: Option<f64>,
}

impl CompactnessReport {
    /// Pure arithmetic over the counts; shared by every entry point so
    /// the reporting math is testable without building giant plans.
    pub fn from_counts(
        method: Method,
        max_seq_len: u32,
        num_sequences: u64,
        num_padding_tokens: u64,
        concat_sequences: Option<u64>,
    ) -> Self {
        let slots = num_sequences * max_seq_len as u64;
        let padding_fraction = if slots == 0 {
            0.0
        } else {
            num_padding_tokens as f64 / slots as f64
        };
        let delta_vs_concat =
            concat_sequences.map(|m| num_sequences as i64 - m as i64);
        let delta_pct = concat_sequences.and_then(|m| {
            let delta = num_sequences as i64 - m as i64;
            if m == 0 {
                (delta == 0).then_some(0.0)
            } else {
                Some(delta as f64 / m as f64 * 100.0)
            }
        });
        CompactnessReport {
            method,
            max_seq_len,
            num_sequences,
            num_padding_tokens,
            padding_fraction,
            delta_vs_concat,
            delta_pct,
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "compactness ({})", self.method);
        let _ = writeln!(out, "  sequences        {:>16}", self.num_sequences);
        let _ = writeln!(out, "  padding tokens   {:>16}", self.num_padding_tokens);
        let _ = writeln!(
            out,
            "  padding fraction {:>16.6}%",
            self.padding_fraction * 100.0
        );
        if let (Some(delta), Some(pct)) = (self.delta_vs_concat, self.delta_pct) {
            let _ = writeln!(out, "  delta vs concat  {:>+16}", delta);
            let _ = writeln!(out, "  delta %          {:>+16.6}%", pct);
        }
        out
    }
}

/// Compares plan size against the sequence-count lower bound and, when a
/// concat reference from the same corpus is supplied, against concat.
pub fn compactness(
    plan: &PackingPlan,
    concat_ref: Option<&PackingPlan>,
) -> Result<CompactnessReport> {
    let concat_sequences = match concat_ref {
        None => None,
        Some(reference) => {
            if reference.max_seq_len() != plan.max_seq_len() {
                return Err(Error::PlanMismatch(format!(
                    "reference max sequence length {} != plan {}",
                    reference.max_seq_len(),
                    plan.max_seq_len()
                )));
            }
            match (plan.corpus_fingerprint(), reference.corpus_fingerprint()) {
                (Some(a), Some(b)) if a == b => {}
                _ => {
                    return Err(Error::PlanMismatch(
                        "plan and concat reference were not built from the same corpus".into(),
                    ))
                }
            }
            Some(reference.num_sequences())
        }
    };
    Ok(CompactnessReport::from_counts(
        plan.method(),
        plan.max_seq_len(),
        plan.num_sequences(),
        plan.total_padding(),
        concat_sequences,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub doc_count: u64,
    pub truncations: u64,
}

/// Truncation events aggregated by effective document length. For
/// packing methods an event is a forced chunk cut (`ceil(l/L) - 1` per
/// document); for concat it is a sequence boundary falling strictly
/// inside a document's span of the concatenated stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub method: Method,
    pub max_seq_len: u32,
    pub rows: BTreeMap<u32, TruncationRow>,
    pub total_truncations: u64,
    /// Documents with at least one truncation.
    pub truncated_docs: u64,
}

impl TruncationReport {
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "length,doc_count,truncations")?;
        for (length, row) in &self.rows {
            writeln!(out, "{length},{},{}", row.doc_count, row.truncations)?;
        }
        Ok(())
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "truncations ({})", self.method);
        let _ = writeln!(out, "  {:>10} {:>12} {:>12}", "length", "docs", "cuts");
        for (length, row) in &self.rows {
            if row.truncations > 0 {
                let _ = writeln!(
                    out,
                    "  {:>10} {:>12} {:>12}",
                    length, row.doc_count, row.truncations
                );
            }
        }
        let _ = writeln!(out, "  total truncations {}", self.total_truncations);
        let _ = writeln!(out, "  truncated docs    {}", self.truncated_docs);
        out
    }
}

/// Counts truncation events per document length for `plan` over the
/// corpus it was built from.
pub fn truncations(plan: &PackingPlan, corpus: &Corpus) -> Result<TruncationReport> {
    plan.check_corpus(corpus)?;
    let max_seq_len = corpus.max_seq_len() as u64;
    let mut rows: BTreeMap<u32, TruncationRow> = BTreeMap::new();
    let mut total = 0u64;
    let mut truncated_docs = 0u64;
    let mut offset = 0u64;
    for length in corpus.lengths() {
        let cuts = if plan.method().is_packing() {
            (length as u64).div_ceil(max_seq_len) - 1
        } else {
            // Sequence boundaries strictly inside the document's span of
            // the concatenated stream.
            let end = offset + length as u64;
            (end - 1) / max_seq_len - offset / max_seq_len
        };
        offset += length as u64;
        let row = rows.entry(length).or_insert(TruncationRow {
            doc_count: 0,
            truncations: 0,
        });
        row.doc_count += 1;
        row.truncations += cuts;
        total += cuts;
        truncated_docs += (cuts > 0) as u64;
    }
    Ok(TruncationReport {
        method: plan.method(),
        max_seq_len: corpus.max_seq_len(),
        rows,
        total_truncations: total,
        truncated_docs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub docs: u64,
    pub chunks: u64,
    pub obfd_secs: f64,
    pub ffd_secs: f64,
    /// `ffd_secs / obfd_secs`.
    pub speedup: f64,
    /// True when either timing is too small to trust.
    pub below_resolution: bool,
}

/// Wall-clock comparison of the two packers across corpus sizes. Times
/// are machine-dependent; only the speedup trend is meaningful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub max_seq_len: u32,
    pub seed: u64,
    pub repetitions: u32,
    pub rows: Vec<ScalingRow>,
}

impl ScalingReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "packer scaling (L = {}, {} reps, min taken)",
            self.max_seq_len, self.repetitions
        );
        let _ = writeln!(
            out,
            "  {:>12} {:>12} {:>12} {:>12} {:>10}",
            "docs", "chunks", "obfd (s)", "ffd (s)", "ffd/obfd"
        );
        for row in &self.rows {
            let _ = writeln!(
                out,
                "  {:>12} {:>12} {:>12.3} {:>12.3} {:>10.3}{}",
                row.docs,
                row.chunks,
                row.obfd_secs,
                row.ffd_secs,
                row.speedup,
                if row.below_resolution {
                    "  (below timer resolution)"
                } else {
                    ""
                }
            );
        }
        out
    }
}

const TIMER_RESOLUTION_SECS: f64 = 1e-3;

/// Packs synthetic corpora of each size with both packers on one thread,
/// `repetitions` times each, and reports the minimum wall time per
/// packer. Sizes must be strictly ascending; inputs are identical for
/// both packers at a given size.
pub fn bench_scaling(
    spec: &SyntheticSpec,
    sizes: &[u64],
    repetitions: u32,
) -> Result<ScalingReport> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("bench sizes must be strictly ascending".into()));
    }
    if repetitions == 0 {
        return Err(Error::Config("bench needs at least one repetition".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &docs in sizes {
        let lengths = spec.effective_lengths(docs);
        let chunkset = chunk_lengths(&lengths, spec.max_seq_len);
        drop(lengths);
        let chunks = chunkset.chunks();

        let mut obfd_secs = f64::INFINITY;
        let mut ffd_secs = f64::INFINITY;
        for _ in 0..repetitions {
            let start = Instant::now();
            let plan = pack_bfd_optimized(chunks, spec.max_seq_len);
            obfd_secs = obfd_secs.min(start.elapsed().as_secs_f64());
            drop(plan);

            let start = Instant::now();
            let plan = pack_ffd(chunks, spec.max_seq_len);
            ffd_secs = ffd_secs.min(start.elapsed().as_secs_f64());
            drop(plan);
        }
        rows.push(ScalingRow {
            docs,
            chunks: chunks.len() as u64,
            obfd_secs,
            ffd_secs,
            speedup: ffd_secs / obfd_secs,
            below_resolution: obfd_secs.min(ffd_secs) < TIMER_RESOLUTION_SECS,
        });
    }
    Ok(ScalingReport {
        max_seq_len: spec.max_seq_len,
        seed: spec.seed,
        repetitions,
        rows,
    })
}
