//! Groups chunks into fixed-length sequences.
//!
//! Four strategies plus an exact reference:
//!
//! * [`pack_bfd_optimized`] — best-fit-decreasing where the best-fit
//!   lookup runs over remaining-capacity *values* (a [`CapacityTree`]
//!   with `L` leaves) instead of bins, so packing is `O(N log L)`. Bins
//!   with equal remaining capacity are interchangeable, kept in per-
//!   capacity LIFO stacks.
//! * [`pack_bfd_naive`] — the same placement rule with an ordered search
//!   (`BTreeMap`) over open-bin capacities; the independent reference the
//!   optimized variant is checked against, placement for placement.
//! * [`pack_ffd`] — first-fit-decreasing over a max segment tree with one
//!   leaf per bin (`O(N log N)`), the runtime baseline.
//! * [`pack_concat`] — concatenate-then-split over the document stream.
//! * [`pack_optimal`] — branch-and-bound exact solver, capped to small
//!   instances; exists as a test oracle.
//!
//! All packers are deterministic: identical input produces an identical
//! plan.

use std::collections::BTreeMap;

use crate::captree::CapacityTree;
use crate::chunker::{chunk_corpus, ChunkSet};
use crate::corpus::{Chunk, Corpus, Slice};
use crate::plan::{Method, PackingPlan, Sequence};
use crate::{Error, Result};

/// Largest instance the exact solver accepts by default.
pub const DEFAULT_OPTIMAL_CAP: usize = 14;

/// One placement decision, for stepwise comparison between packers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    /// Item weight.
    pub weight: u32,
    /// Remaining capacity of the chosen bin before placement (`L` when a
    /// fresh bin was opened).
    pub capacity: u32,
    /// Creation ordinal of the chosen bin.
    pub bin: u32,
    /// Remaining capacity after placement.
    pub remaining_after: u32,
}

/// An open or closed bin: creation ordinal is its index in the packer's
/// bin table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bin {
    pub remaining: u32,
    pub items: Vec<Slice>,
}

/// Counting sort by chunk length, descending, stable in the input order
/// among equal lengths. `O(N + L)`.
pub fn sort_descending(chunks: &[Chunk], max_seq_len: u32) -> Vec<Chunk> {
    let cap = max_seq_len as usize;
    let mut counts = vec![0usize; cap + 1];
    for chunk in chunks {
        let w = chunk.len() as usize;
        assert!(w >= 1 && w <= cap, "chunk length {w} outside 1..={cap}");
        counts[w] += 1;
    }
    // Turn counts into starting offsets, longest length first.
    let mut next = counts;
    let mut acc = 0usize;
    for w in (1..=cap).rev() {
        let count = next[w];
        next[w] = acc;
        acc += count;
    }
    let mut sorted = vec![
        Chunk {
            doc: 0,
            index: 0,
            start: 0,
            end: 0
        };
        chunks.len()
    ];
    for chunk in chunks {
        let slot = &mut next[chunk.len() as usize];
        sorted[*slot] = *chunk;
        *slot += 1;
    }
    sorted
}

/// Best-fit-decreasing working set: bin table, capacity-to-bins stacks,
/// and the capacity segment tree. Items must be fed in the desired order
/// (descending length for BFD proper); each [`place`](Self::place) call
/// runs one placement in `O(log L)`.
pub struct BfdPacker {
    max_seq_len: u32,
    bins: Vec<Bin>,
    /// `buckets[r]` holds the ids of open bins with remaining capacity
    /// exactly `r`, most recently touched on top. Index 0 is unused —
    /// full bins leave the structure.
    buckets: Vec<Vec<u32>>,
    tree: CapacityTree,
}

impl BfdPacker {
    pub fn new(max_seq_len: u32) -> Self {
        assert!(max_seq_len >= 1);
        BfdPacker {
            max_seq_len,
            bins: Vec::new(),
            buckets: vec![Vec::new(); max_seq_len as usize + 1],
            tree: CapacityTree::new(max_seq_len),
        }
    }

    pub fn max_seq_len(&self) -> u32 {
        self.max_seq_len
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn tree(&self) -> &CapacityTree {
        &self.tree
    }

    /// Capacities whose bucket currently holds at least one bin.
    pub fn bucket_capacities(&self) -> Vec<u32> {
        (1..=self.max_seq_len)
            .filter(|&r| !self.buckets[r as usize].is_empty())
            .collect()
    }

    /// Places one chunk into the tightest adequate bin, opening a fresh
    /// bin when only the virtual empty-bin capacity fits.
    pub fn place(&mut self, chunk: Chunk) -> Placement {
        let weight = chunk.len();
        assert!(
            weight >= 1 && weight <= self.max_seq_len,
            "chunk length {weight} outside 1..={}",
            self.max_seq_len
        );
        let capacity = self
            .tree
            .query_best_fit(weight)
            .expect("empty-bin leaf is permanently live");
        let bin = match self.buckets[capacity as usize].pop() {
            Some(id) => {
                if self.buckets[capacity as usize].is_empty() && capacity != self.max_seq_len {
                    self.tree.set_capacity(capacity, false);
                }
                id
            }
            None => {
                debug_assert_eq!(capacity, self.max_seq_len, "only leaf L matches sans bins");
                let id = self.bins.len() as u32;
                self.bins.push(Bin {
                    remaining: self.max_seq_len,
                    items: Vec::new(),
                });
                id
            }
        };
        let remaining_after = capacity - weight;
        let slot = &mut self.bins[bin as usize];
        slot.remaining = remaining_after;
        slot.items.push(chunk.slice());
        if remaining_after > 0 {
            let bucket = &mut self.buckets[remaining_after as usize];
            bucket.push(bin);
            if bucket.len() == 1 {
                self.tree.set_capacity(remaining_after, true);
            }
        }
        Placement {
            weight,
            capacity,
            bin,
            remaining_after,
        }
    }

    fn finish(self, method: Method) -> PackingPlan {
        PackingPlan::from_parts(method, self.max_seq_len, bins_to_sequences(self.bins), 0)
    }
}

fn bins_to_sequences(bins: Vec<Bin>) -> Vec<Sequence> {
    bins.into_iter()
        .map(|bin| Sequence {
            items: bin.items,
            pad: bin.remaining,
        })
        .collect()
}

/// Optimized best-fit-decreasing: counting sort + capacity-tree search.
pub fn pack_bfd_optimized(chunks: &[Chunk], max_seq_len: u32) -> PackingPlan {
    pack_bfd_optimized_traced(chunks, max_seq_len, false).0
}

/// [`pack_bfd_optimized`] that optionally records each placement.
pub fn pack_bfd_optimized_traced(
    chunks: &[Chunk],
    max_seq_len: u32,
    record: bool,
) -> (PackingPlan, Vec<Placement>) {
    let sorted = sort_descending(chunks, max_seq_len);
    let mut packer = BfdPacker::new(max_seq_len);
    let mut trace = Vec::with_capacity(if record { sorted.len() } else { 0 });
    for chunk in sorted {
        let placement = packer.place(chunk);
        if record {
            trace.push(placement);
        }
    }
    (packer.finish(Method::BfdOptimized), trace)
}

/// Reference best-fit-decreasing: same LIFO tie-breaking, but the search
/// for the tightest adequate bin is an ordered map over open bins.
pub fn pack_bfd_naive(chunks: &[Chunk], max_seq_len: u32) -> PackingPlan {
    pack_bfd_naive_traced(chunks, max_seq_len, false).0
}

/// [`pack_bfd_naive`] that optionally records each placement.
pub fn pack_bfd_naive_traced(
    chunks: &[Chunk],
    max_seq_len: u32,
    record: bool,
) -> (PackingPlan, Vec<Placement>) {
    let sorted = sort_descending(chunks, max_seq_len);
    let mut bins: Vec<Bin> = Vec::new();
    // remaining capacity -> stack of open bins, most recently used on top
    let mut by_capacity: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    let mut trace = Vec::with_capacity(if record { sorted.len() } else { 0 });
    for chunk in sorted {
        let weight = chunk.len();
        debug_assert!(weight >= 1 && weight <= max_seq_len);
        let best = by_capacity
            .range(weight..)
            .next()
            .map(|(&capacity, _)| capacity);
        let (capacity, bin) = match best {
            Some(capacity) => {
                let stack = by_capacity.get_mut(&capacity).expect("key just found");
                let bin = stack.pop().expect("stacks are pruned when emptied");
                if stack.is_empty() {
                    by_capacity.remove(&capacity);
                }
                (capacity, bin)
            }
            None => {
                let bin = bins.len() as u32;
                bins.push(Bin {
                    remaining: max_seq_len,
                    items: Vec::new(),
                });
                (max_seq_len, bin)
            }
        };
        let remaining_after = capacity - weight;
        let slot = &mut bins[bin as usize];
        slot.remaining = remaining_after;
        slot.items.push(chunk.slice());
        if remaining_after > 0 {
            by_capacity.entry(remaining_after).or_default().push(bin);
        }
        if record {
            trace.push(Placement {
                weight,
                capacity,
                bin,
                remaining_after,
            });
        }
    }
    (
        PackingPlan::from_parts(Method::BfdNaive, max_seq_len, bins_to_sequences(bins), 0),
        trace,
    )
}

/// First-fit-decreasing: lowest-indexed bin with room, found via a max
/// segment tree with one leaf per bin (all `N` of them), `O(N log N)`.
pub fn pack_ffd(chunks: &[Chunk], max_seq_len: u32) -> PackingPlan {
    let sorted = sort_descending(chunks, max_seq_len);
    let n = sorted.len();
    if n == 0 {
        return PackingPlan::from_parts(Method::Ffd, max_seq_len, Vec::new(), 0);
    }
    // Leaf i = remaining capacity of bin i; every bin starts empty.
    let leaf_base = n.next_power_of_two();
    let mut nodes = vec![0u32; 2 * leaf_base];
    nodes[leaf_base..leaf_base + n].fill(max_seq_len);
    for i in (1..leaf_base).rev() {
        nodes[i] = nodes[2 * i].max(nodes[2 * i + 1]);
    }

    let mut bins: Vec<Bin> = Vec::new();
    for chunk in sorted {
        let weight = chunk.len();
        // Descend preferring the left subtree: first bin with room.
        debug_assert!(nodes[1] >= weight, "a fresh bin always fits a chunk");
        let mut node = 1;
        while node < leaf_base {
            node = if nodes[2 * node] >= weight {
                2 * node
            } else {
                2 * node + 1
            };
        }
        let bin = node - leaf_base;
        // First-fit touches fresh bins in index order, so used bins form
        // a prefix of the table.
        debug_assert!(bin <= bins.len());
        if bin == bins.len() {
            bins.push(Bin {
                remaining: max_seq_len,
                items: Vec::new(),
            });
        }
        let remaining_after = nodes[node] - weight;
        nodes[node] = remaining_after;
        let mut up = node;
        while up > 1 {
            up /= 2;
            let merged = nodes[2 * up].max(nodes[2 * up + 1]);
            if nodes[up] == merged {
                break;
            }
            nodes[up] = merged;
        }
        let slot = &mut bins[bin];
        slot.remaining = remaining_after;
        slot.items.push(chunk.slice());
    }
    PackingPlan::from_parts(Method::Ffd, max_seq_len, bins_to_sequences(bins), 0)
}

/// Concatenate-then-split: documents laid end to end in corpus order
/// (sentinels already folded into effective lengths), the stream cut
/// every `L` tokens. The final partial sequence is padded, or dropped
/// when `drop_remainder` is set.
pub fn pack_concat(corpus: &Corpus, drop_remainder: bool) -> PackingPlan {
    let max_seq_len = corpus.max_seq_len();
    let mut sequences = Vec::with_capacity(
        (corpus.total_tokens() / max_seq_len as u64 + 1) as usize,
    );
    let mut items: Vec<Slice> = Vec::new();
    let mut filled = 0u32;
    for (doc, length) in corpus.lengths().enumerate() {
        let doc = doc as u32;
        let mut pos = 0u32;
        while pos < length {
            let take = (max_seq_len - filled).min(length - pos);
            items.push(Slice {
                doc,
                start: pos,
                end: pos + take,
            });
            pos += take;
            filled += take;
            if filled == max_seq_len {
                sequences.push(Sequence {
                    items: std::mem::take(&mut items),
                    pad: 0,
                });
                filled = 0;
            }
        }
    }
    let mut dropped_tokens = 0;
    if filled > 0 {
        if drop_remainder {
            dropped_tokens = filled as u64;
        } else {
            sequences.push(Sequence {
                items,
                pad: max_seq_len - filled,
            });
        }
    }
    PackingPlan::from_parts(Method::Concat, max_seq_len, sequences, dropped_tokens)
        .bind(corpus)
}

/// Exact minimal-bin packing by branch and bound. Only for small
/// instances; refuses more than [`DEFAULT_OPTIMAL_CAP`] chunks.
pub fn pack_optimal(chunks: &[Chunk], max_seq_len: u32) -> Result<PackingPlan> {
    pack_optimal_capped(chunks, max_seq_len, DEFAULT_OPTIMAL_CAP)
}

/// [`pack_optimal`] with an explicit instance cap.
pub fn pack_optimal_capped(
    chunks: &[Chunk],
    max_seq_len: u32,
    cap: usize,
) -> Result<PackingPlan> {
    if chunks.len() > cap {
        return Err(Error::Capacity(format!(
            "exact solver limited to {cap} chunks, got {}",
            chunks.len()
        )));
    }
    let sorted = sort_descending(chunks, max_seq_len);
    let weights: Vec<u32> = sorted.iter().map(|c| c.len()).collect();
    let total: u64 = weights.iter().map(|&w| w as u64).sum();

    // Feasible incumbent from first-fit-decreasing.
    let mut best_assign: Vec<u32> = Vec::with_capacity(sorted.len());
    let mut ffd_remaining: Vec<u32> = Vec::new();
    for &w in &weights {
        match ffd_remaining.iter().position(|&r| r >= w) {
            Some(i) => {
                ffd_remaining[i] -= w;
                best_assign.push(i as u32);
            }
            None => {
                ffd_remaining.push(max_seq_len - w);
                best_assign.push(ffd_remaining.len() as u32 - 1);
            }
        }
    }
    let mut best_bins = ffd_remaining.len();
    let floor = total.div_ceil(max_seq_len as u64) as usize;

    if best_bins > floor {
        let mut search = Search {
            weights: &weights,
            max_seq_len,
            suffix_total: suffix_totals(&weights),
            remaining: Vec::new(),
            assign: vec![0; weights.len()],
            best_bins: &mut best_bins,
            best_assign: &mut best_assign,
            floor,
        };
        search.run(0);
    }

    // Rebuild bins from the winning assignment; bin ids are creation
    // order because fresh bins are always appended.
    let num_bins = best_bins;
    let mut bins: Vec<Bin> = (0..num_bins)
        .map(|_| Bin {
            remaining: max_seq_len,
            items: Vec::new(),
        })
        .collect();
    for (chunk, &bin) in sorted.iter().zip(best_assign.iter()) {
        let slot = &mut bins[bin as usize];
        slot.remaining -= chunk.len();
        slot.items.push(chunk.slice());
    }
    Ok(PackingPlan::from_parts(
        Method::Optimal,
        max_seq_len,
        bins_to_sequences(bins),
        0,
    ))
}

fn suffix_totals(weights: &[u32]) -> Vec<u64> {
    let mut suffix = vec![0u64; weights.len() + 1];
    for i in (0..weights.len()).rev() {
        suffix[i] = suffix[i + 1] + weights[i] as u64;
    }
    suffix
}

struct Search<'a> {
    weights: &'a [u32],
    max_seq_len: u32,
    suffix_total: Vec<u64>,
    remaining: Vec<u32>,
    assign: Vec<u32>,
    best_bins: &'a mut usize,
    best_assign: &'a mut Vec<u32>,
    floor: usize,
}

impl Search<'_> {
    fn run(&mut self, item: usize) {
        if *self.best_bins == self.floor {
            return;
        }
        if item == self.weights.len() {
            if self.remaining.len() < *self.best_bins {
                *self.best_bins = self.remaining.len();
                self.best_assign.clone_from(&self.assign);
            }
            return;
        }
        // Bound: even filling all open space perfectly, the leftover
        // items force this many extra bins.
        let open_space: u64 = self.remaining.iter().map(|&r| r as u64).sum();
        let overflow = self.suffix_total[item].saturating_sub(open_space);
        let need = self.remaining.len() + overflow.div_ceil(self.max_seq_len as u64) as usize;
        if need >= *self.best_bins {
            return;
        }

        let w = self.weights[item];
        // Bins with equal remaining capacity are interchangeable; try one
        // representative per distinct value, in creation order.
        let mut tried: Vec<u32> = Vec::new();
        for bin in 0..self.remaining.len() {
            let r = self.remaining[bin];
            if r < w || tried.contains(&r) {
                continue;
            }
            tried.push(r);
            self.remaining[bin] = r - w;
            self.assign[item] = bin as u32;
            self.run(item + 1);
            self.remaining[bin] = r;
        }
        if self.remaining.len() + 1 < *self.best_bins {
            self.remaining.push(self.max_seq_len - w);
            self.assign[item] = self.remaining.len() as u32 - 1;
            self.run(item + 1);
            self.remaining.pop();
        }
    }
}

/// Whole-corpus convenience: chunk, pack with `method`, and bind the plan
/// to the corpus. `drop_remainder` only affects concat.
pub fn pack_corpus(
    method: Method,
    corpus: &Corpus,
    drop_remainder: bool,
) -> Result<PackingPlan> {
    if method == Method::Concat {
        return Ok(pack_concat(corpus, drop_remainder));
    }
    let chunkset: ChunkSet = chunk_corpus(corpus);
    let chunks = chunkset.chunks();
    let max_seq_len = corpus.max_seq_len();
    let plan = match method {
        Method::BfdOptimized => pack_bfd_optimized(chunks, max_seq_len),
        Method::BfdNaive => pack_bfd_naive(chunks, max_seq_len),
        Method::Ffd => pack_ffd(chunks, max_seq_len),
        Method::Optimal => pack_optimal(chunks, max_seq_len)?,
        Method::Concat => unreachable!(),
    };
    Ok(plan.bind(corpus))
}
