//! Acceptance suite: one test per release criterion, each printing a
//! single PASS/FAIL line (visible with `--nocapture`).
//!
//! Run with: `cargo test --test acceptance -- --nocapture`

use std::collections::BTreeMap;
use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use seqpack::captree::CapacityTree;
use seqpack::corpus::{Chunk, Corpus};
use seqpack::packer::{
    pack_bfd_naive_traced, pack_bfd_optimized, pack_bfd_optimized_traced, pack_concat,
    pack_corpus, pack_ffd, pack_optimal, BfdPacker, Placement,
};
use seqpack::plan::Method;
use seqpack::stats::{bench_scaling, compactness, truncations};
use seqpack::synth::SyntheticSpec;
use seqpack::toyproc::ToyProcess;

const DESK_SCALE_SEED: u64 = 42;
const DESK_SCALE_DOCS: u64 = 1_000_000;
const DESK_SCALE_LEN: u32 = 2048;

fn check(criterion: u32, ok: bool, details: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {verdict} — {details}");
    assert!(ok, "criterion {criterion} failed: {details}");
}

fn chunks_of(lengths: &[u32]) -> Vec<Chunk> {
    lengths
        .iter()
        .enumerate()
        .map(|(i, &len)| Chunk {
            doc: i as u32,
            index: 0,
            start: 0,
            end: len,
        })
        .collect()
}

#[test]
fn criterion_1_figure_golden() {
    let start = Instant::now();
    let corpus = Corpus::from_lengths(&[14, 7, 5, 2, 3], 8).unwrap();

    let pack = pack_corpus(Method::BfdOptimized, &corpus, false).unwrap();
    let pack_trunc = truncations(&pack, &corpus).unwrap();
    let concat = pack_concat(&corpus, false);
    let concat_trunc = truncations(&concat, &corpus).unwrap();
    let elapsed = start.elapsed();

    let ok = pack.num_sequences() == 4
        && pack_trunc.truncated_docs == 1
        && pack.total_padding() == 1
        && concat.num_sequences() == 4
        && concat_trunc.truncated_docs == 3
        && elapsed < Duration::from_secs(1);
    check(
        1,
        ok,
        &format!(
            "pack: {} sequences, {} truncated docs, {} pad; concat: {} sequences, {} truncated docs ({:?})",
            pack.num_sequences(),
            pack_trunc.truncated_docs,
            pack.total_padding(),
            concat.num_sequences(),
            concat_trunc.truncated_docs,
            elapsed
        ),
    );
}

#[test]
fn criterion_2_capacity_tree_golden() {
    let mut packer = BfdPacker::new(8);
    for chunk in chunks_of(&[8, 6, 6, 4]) {
        packer.place(chunk);
    }
    let buckets = packer.bucket_capacities();
    let live = packer.tree().live_capacities();
    let query = packer.tree().query_best_fit(3);

    // Independent query check on a bare tree with the same live set.
    let mut tree = CapacityTree::new(8);
    tree.set_capacity(2, true);
    tree.set_capacity(4, true);
    let bare_query = tree.query_best_fit(3);

    let placement = packer.place(chunks_of(&[3])[0]);

    let ok = buckets == vec![2, 4]
        && live == vec![2, 4, 8]
        && query == Some(4)
        && bare_query == Some(4)
        && placement.capacity == 4
        && placement.bin == 3
        && placement.remaining_after == 1;
    check(
        2,
        ok,
        &format!(
            "open-bin capacities {buckets:?}, live leaves {live:?}, query(3) = {query:?}, \
             weight-3 item landed in bin {} (capacity {}, now {})",
            placement.bin, placement.capacity, placement.remaining_after
        ),
    );
}

/// Replays a placement trace into a remaining-capacity multiset, one step
/// at a time.
fn multiset_steps(max_seq_len: u32, trace: &[Placement]) -> Vec<BTreeMap<u32, u64>> {
    let mut multiset: BTreeMap<u32, u64> = BTreeMap::new();
    let mut steps = Vec::with_capacity(trace.len());
    for placement in trace {
        if placement.capacity < max_seq_len {
            let count = multiset
                .get_mut(&placement.capacity)
                .expect("placement consumed a tracked capacity");
            *count -= 1;
            if *count == 0 {
                multiset.remove(&placement.capacity);
            }
        }
        if placement.remaining_after > 0 {
            *multiset.entry(placement.remaining_after).or_insert(0) += 1;
        }
        steps.push(multiset.clone());
    }
    steps
}

#[test]
fn criterion_3_bfd_oracle_equivalence() {
    let start = Instant::now();
    let max_lens = [16u32, 64, 2048];
    let instances = 1000;
    let mut mismatches = 0u32;
    for i in 0..instances {
        let max_seq_len = max_lens[i % max_lens.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(0xC3 + i as u64);
        let n = rng.random_range(1..=200usize);
        let lengths: Vec<u32> = (0..n).map(|_| rng.random_range(1..=max_seq_len)).collect();
        let chunks = chunks_of(&lengths);

        let (opt_plan, opt_trace) = pack_bfd_optimized_traced(&chunks, max_seq_len, true);
        let (naive_plan, naive_trace) = pack_bfd_naive_traced(&chunks, max_seq_len, true);

        let counts_match = opt_plan.num_sequences() == naive_plan.num_sequences();
        let steps_match = multiset_steps(max_seq_len, &opt_trace)
            == multiset_steps(max_seq_len, &naive_trace);
        if !(counts_match && steps_match && opt_plan.sequences() == naive_plan.sequences()) {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = mismatches == 0 && elapsed < Duration::from_secs(30);
    check(
        3,
        ok,
        &format!(
            "{instances} instances (N <= 200, L in {max_lens:?}): {mismatches} mismatches ({elapsed:?})"
        ),
    );
}

#[test]
fn criterion_4_approximation_bound() {
    let max_lens = [8u32, 12, 16];
    let instances = 600;
    let mut violations = 0u32;
    for i in 0..instances {
        let max_seq_len = max_lens[i % max_lens.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(0xA9 + i as u64);
        let n = rng.random_range(1..=12usize);
        let lengths: Vec<u32> = (0..n).map(|_| rng.random_range(1..=max_seq_len)).collect();
        let chunks = chunks_of(&lengths);

        let optimal = pack_optimal(&chunks, max_seq_len).unwrap().num_sequences();
        let bound = (11 * optimal).div_ceil(9) + 1;
        for plan in [
            pack_bfd_optimized(&chunks, max_seq_len),
            pack_ffd(&chunks, max_seq_len),
        ] {
            if plan.num_sequences() > bound || plan.num_sequences() < optimal {
                violations += 1;
            }
        }
    }
    check(
        4,
        violations == 0,
        &format!(
            "{instances} instances (N <= 12): {violations} violations of bins <= ceil(11/9 optimal) + 1"
        ),
    );
}

fn desk_scale_corpus() -> Corpus {
    SyntheticSpec::new(DESK_SCALE_SEED, DESK_SCALE_LEN)
        .corpus(DESK_SCALE_DOCS)
        .unwrap()
}

#[test]
fn criterion_5_desk_scale_compactness() {
    let start = Instant::now();
    let corpus = desk_scale_corpus();
    let pack = pack_corpus(Method::BfdOptimized, &corpus, false).unwrap();
    let concat = pack_concat(&corpus, false);
    let report = compactness(&pack, Some(&concat)).unwrap();
    let elapsed = start.elapsed();

    let padding_pct = report.padding_fraction * 100.0;
    let delta_pct = report.delta_pct.unwrap();
    let ok = padding_pct < 0.1 && delta_pct < 0.05 && elapsed < Duration::from_secs(120);
    check(
        5,
        ok,
        &format!(
            "{} docs at L = {}: padding {padding_pct:.6}% (< 0.1%), delta vs concat {:+} sequences = {delta_pct:.6}% (< 0.05%) ({elapsed:?})",
            DESK_SCALE_DOCS,
            DESK_SCALE_LEN,
            report.delta_vs_concat.unwrap(),
        ),
    );
}

#[test]
fn criterion_6_truncation_elimination() {
    let corpus = desk_scale_corpus();
    let pack = pack_corpus(Method::BfdOptimized, &corpus, false).unwrap();
    let concat = pack_concat(&corpus, false);
    let pack_trunc = truncations(&pack, &corpus).unwrap();
    let concat_trunc = truncations(&concat, &corpus).unwrap();

    let short_doc_cuts: u64 = pack_trunc
        .rows
        .iter()
        .filter(|(&len, _)| len <= DESK_SCALE_LEN)
        .map(|(_, row)| row.truncations)
        .sum();
    let ok = short_doc_cuts == 0
        && pack_trunc.total_truncations <= concat_trunc.total_truncations;
    check(
        6,
        ok,
        &format!(
            "packing cuts at lengths <= L: {short_doc_cuts} (must be 0); total cuts packing {} <= concat {}",
            pack_trunc.total_truncations, concat_trunc.total_truncations
        ),
    );
}

#[test]
fn criterion_7_scaling_trend() {
    let start = Instant::now();
    let spec = SyntheticSpec::new(7, DESK_SCALE_LEN);
    let report = bench_scaling(&spec, &[1_000_000, 10_000_000], 3).unwrap();
    let elapsed = start.elapsed();

    let small = &report.rows[0];
    let large = &report.rows[1];
    let ok = large.speedup > small.speedup && elapsed < Duration::from_secs(1200);
    check(
        7,
        ok,
        &format!(
            "FFD/OBFD speedup {:.3} at 1e6 docs -> {:.3} at 1e7 docs (obfd {:.2}s/{:.2}s, ffd {:.2}s/{:.2}s; {elapsed:?})",
            small.speedup, large.speedup, small.obfd_secs, large.obfd_secs, small.ffd_secs, large.ffd_secs
        ),
    );
}

#[test]
fn criterion_8_toy_process_exactness() {
    let start = Instant::now();
    let p_grid = [0.55, 0.6, 0.75, 0.9];
    let ln2 = std::f64::consts::LN_2;

    let mut positive_everywhere = true;
    let mut decays = true;
    for &p in &p_grid {
        let toy = ToyProcess::new(p).unwrap();
        let mut first = 0.0;
        let mut last = 0.0;
        for m in 1..=200u32 {
            let rel = toy.relative_increase(m).unwrap();
            positive_everywhere &= rel > 0.0;
            if m == 1 {
                first = rel;
            }
            if m == 200 {
                last = rel;
            }
        }
        decays &= last < first;
        if p >= 0.7 {
            decays &= last < 1e-2;
        }
    }

    let boundary = ToyProcess::new(0.5).unwrap();
    let boundary_exact = (1..=200u32).step_by(7).all(|m| {
        (boundary.model_b_expected_loss(m).unwrap() - ln2).abs() < 1e-12
    });

    let mut monte_carlo_hits = 0u32;
    let mut monte_carlo_total = 0u32;
    for &p in &p_grid {
        let toy = ToyProcess::new(p).unwrap();
        for m in [1u32, 5, 20] {
            let exact = toy.model_b_expected_loss(m).unwrap();
            let est = toy.simulate_model_b_loss(m, 1_000_000, 0x8eed ^ (m as u64) << 8);
            monte_carlo_total += 1;
            if (est.mean - exact).abs() <= 3.0 * est.std_err {
                monte_carlo_hits += 1;
            }
        }
    }
    let elapsed = start.elapsed();

    let ok = positive_everywhere
        && decays
        && boundary_exact
        && monte_carlo_hits == monte_carlo_total
        && elapsed < Duration::from_secs(120);
    check(
        8,
        ok,
        &format!(
            "relative increase positive for all p in {p_grid:?}, m in 1..=200: {positive_everywhere}; decays: {decays}; \
             p = 0.5 gives ln 2 within 1e-12: {boundary_exact}; Monte-Carlo within 3 sigma: {monte_carlo_hits}/{monte_carlo_total} ({elapsed:?})"
        ),
    );
}

#[test]
fn criterion_9_plan_determinism() {
    let dir = TempDir::new().unwrap();
    let corpus_path = dir.path().join("corpus.jsonl");
    let spec = SyntheticSpec::new(DESK_SCALE_SEED, DESK_SCALE_LEN);
    let file = fs::File::create(&corpus_path).unwrap();
    spec.write_jsonl(DESK_SCALE_DOCS, std::io::BufWriter::new(file))
        .unwrap();

    for run in ["run1", "run2"] {
        let status = Command::new(env!("CARGO_BIN_EXE_seqpack"))
            .args([
                "pack",
                corpus_path.to_str().unwrap(),
                "--max-seq-len",
                &DESK_SCALE_LEN.to_string(),
                "--out",
                dir.path().join(run).to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(status.status.success(), "pack run failed: {status:?}");
    }

    let plan1 = fs::read(dir.path().join("run1/plan.jsonl")).unwrap();
    let plan2 = fs::read(dir.path().join("run2/plan.jsonl")).unwrap();
    let ok = !plan1.is_empty() && plan1 == plan2;
    check(
        9,
        ok,
        &format!(
            "two pack runs over {} docs: plan files byte-identical ({} bytes)",
            DESK_SCALE_DOCS,
            plan1.len()
        ),
    );
}
