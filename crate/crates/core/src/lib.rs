//! Groups tokenized documents into fixed-length language-model training
//! sequences.
//!
//! The pipeline is two-staged: [`chunker`] segments every document into
//! chunks of at most `L` tokens (the minimally required truncation), then
//! [`packer`] groups whole chunks into `L`-token sequences. The default
//! packer is an optimized best-fit-decreasing heuristic whose best-fit
//! lookup runs over a capacity-indexed segment tree ([`captree`]), giving
//! `O(N log L)` packing instead of the `O(N log N)` of bin-indexed search.
//!
//! Baselines (naive best-fit, first-fit-decreasing, concatenate-then-split,
//! and an exact small-instance solver) live alongside it so plans can be
//! compared; [`stats`] turns plans into compactness/truncation reports and
//! runtime scaling benchmarks, and [`toyproc`] evaluates a closed-form
//! stochastic process that quantifies how truncation inflates sequence
//! modeling loss.

pub mod captree;
pub mod chunker;
pub mod corpus;
mod error;
pub mod packer;
pub mod plan;
pub mod stats;
pub mod synth;
pub mod toyproc;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
