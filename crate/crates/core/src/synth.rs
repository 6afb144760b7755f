//! Seeded synthetic corpora for benchmarks and desk-scale measurements.
//!
//! Document lengths follow a lognormal distribution with median
//! `median_frac * L`, resampled until they land in `[1, max_len_factor * L]`.
//! Most documents come out well under the sequence length with a long
//! tail above it, the shape real pre-training corpora show.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::corpus::{Corpus, Document, Sentinel};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub max_seq_len: u32,
    /// Median document length as a fraction of `max_seq_len`.
    pub median_frac: f64,
    /// Lognormal shape parameter.
    pub sigma: f64,
    /// Lengths are truncated to `[1, max_len_factor * max_seq_len]`.
    pub max_len_factor: u32,
}

impl SyntheticSpec {
    pub fn new(seed: u64, max_seq_len: u32) -> Self {
        SyntheticSpec {
            seed,
            max_seq_len,
            median_frac: 0.15,
            sigma: 1.0,
            max_len_factor: 64,
        }
    }

    /// Draws `n` effective document lengths. Deterministic in
    /// `(spec, n)`; shorter draws are prefixes of longer ones.
    pub fn effective_lengths(&self, n: u64) -> Vec<u32> {
        let mu = (self.median_frac * self.max_seq_len as f64).ln();
        let dist = LogNormal::new(mu, self.sigma).expect("sigma is finite and positive");
        let cap = self.max_len_factor as f64 * self.max_seq_len as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut lengths = Vec::with_capacity(n as usize);
        for _ in 0..n {
            // Rejection keeps the distribution shape instead of piling
            // mass on the boundaries.
            let value = loop {
                let x: f64 = dist.sample(&mut rng);
                if (1.0..=cap).contains(&x) {
                    break x;
                }
            };
            lengths.push(value.round() as u32);
        }
        lengths
    }

    /// A full corpus with generated ids (`d0`, `d1`, ...).
    pub fn corpus(&self, n: u64) -> Result<Corpus> {
        let documents = self
            .effective_lengths(n)
            .into_iter()
            .enumerate()
            .map(|(i, length)| Document {
                id: format!("d{i}"),
                length,
                tokens: None,
            })
            .collect();
        Corpus::new(documents, self.max_seq_len, Sentinel::Off)
    }

    /// Writes the corpus as lengths-only JSONL records, the CLI input
    /// format, without materializing `Document`s.
    pub fn write_jsonl(&self, n: u64, mut out: impl std::io::Write) -> std::io::Result<()> {
        for (i, length) in self.effective_lengths(n).into_iter().enumerate() {
            writeln!(out, "{{\"id\": \"d{i}\", \"length\": {length}}}")?;
        }
        Ok(())
    }

    /// Seeded uniform chunk lengths in `[1, max_seq_len]`, for randomized
    /// packer comparisons.
    pub fn uniform_chunk_lengths(&self, n: u64) -> Vec<u32> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..n)
            .map(|_| rng.random_range(1..=self.max_seq_len))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticSpec::new(7, 2048);
        assert_eq!(spec.effective_lengths(1000), spec.effective_lengths(1000));
        assert_eq!(
            spec.effective_lengths(100),
            spec.effective_lengths(1000)[..100].to_vec()
        );
    }

    #[test]
    fn lengths_stay_in_range_with_sane_median() {
        let spec = SyntheticSpec::new(42, 2048);
        let mut lengths = spec.effective_lengths(50_000);
        assert!(lengths
            .iter()
            .all(|&l| (1..=64 * 2048).contains(&l)));
        lengths.sort_unstable();
        let median = lengths[lengths.len() / 2] as f64;
        let target = 0.15 * 2048.0;
        assert!(
            (median - target).abs() < 0.15 * target,
            "median {median} too far from {target}"
        );
    }

    #[test]
    fn jsonl_output_round_trips_through_the_loader() {
        let spec = SyntheticSpec::new(3, 64);
        let mut buf = Vec::new();
        spec.write_jsonl(50, &mut buf).unwrap();
        let corpus = crate::corpus::read_corpus(
            buf.as_slice(),
            "syn850",
            crate::corpus::IngestMode::LengthsOnly,
            64,
            Sentinel::Off,
        )
        .unwrap();
        assert_eq!(corpus.len(), 50);
        assert_eq!(corpus, spec.corpus(50).unwrap());
    }
}
