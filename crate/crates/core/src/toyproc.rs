//! Exact loss evaluation for a two-level binary stochastic process that
//! isolates the cost of truncation.
//!
//! A hidden fair root bit seeds the sequence; every later token equals
//! the root with probability `p`. Model A sees full windows (root
//! included) and its expected next-token loss is the Bernoulli entropy
//! `-p ln p - q ln q`. Model B sees windows with the root cut off, infers
//! the hidden root by Bayes from the `k` zeros among the `m` observed
//! tokens, and pays extra loss for the residual uncertainty.
//!
//! Everything is computed in natural log units. Powers like `p^k q^(m-k)`
//! underflow for large `m`, so all ratios run in log space, and the gap
//! between the two models is evaluated as an explicit per-window
//! Kullback-Leibler term rather than a difference of two nearly equal
//! losses: `loss_B(x0, k) = model_a_loss + KL(true || predicted)` holds
//! identically because the true next-token distribution always has
//! entropy `model_a_loss`. The KL term has a closed form in the
//! prediction offset and stays accurate (and strictly positive) even
//! where the direct difference would vanish in rounding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Largest window length the exact expected-loss summation accepts.
pub const MAX_EXACT_M: u32 = 10_000;

/// Offsets smaller than this are handled by the series expansion of the
/// KL term; larger ones by the log1p closed form.
const KL_SERIES_THRESHOLD: f64 = 1e-4;

/// The process parameterized by the root-agreement probability `p`.
/// `p` must lie in `(0, 1)`; the truncation-hurts regime is `p > 0.5`,
/// with `p = 0.5` as the degenerate boundary where both models coincide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyProcess {
    p: f64,
    q: f64,
    ln_p: f64,
    ln_q: f64,
}

/// Seeded Monte-Carlo estimate of model B's expected loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub trials: u64,
}

impl ToyProcess {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Config(format!(
                "agreement probability must be in (0, 1), got {p}"
            )));
        }
        let q = 1.0 - p;
        Ok(ToyProcess {
            p,
            q,
            ln_p: p.ln(),
            ln_q: q.ln(),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Expected loss of the full-window model: `H(X_m | X_0)`,
    /// independent of the position `m`.
    pub fn model_a_loss(&self) -> f64 {
        -self.p * self.ln_p - self.q * self.ln_q
    }

    /// Log likelihoods of an `m`-token window with `k` zeros under the
    /// two root hypotheses: `(root = 0, root = 1)`.
    fn window_log_likelihoods(&self, m: u32, k: u32) -> (f64, f64) {
        let k = k as f64;
        let rest = m as f64 - k;
        (
            k * self.ln_p + rest * self.ln_q,
            rest * self.ln_p + k * self.ln_q,
        )
    }

    /// `(ln P(next = 0), ln P(next = 1))` predicted by the truncated
    /// model after a window with `k` zeros.
    fn log_predictions(&self, m: u32, k: u32) -> (f64, f64) {
        let (root0, root1) = self.window_log_likelihoods(m, k);
        let ln_norm = log_sum_exp(root0, root1);
        (
            log_sum_exp(root0 + self.ln_p, root1 + self.ln_q) - ln_norm,
            log_sum_exp(root0 + self.ln_q, root1 + self.ln_p) - ln_norm,
        )
    }

    /// Probability the truncated model assigns to the next token being
    /// zero, given `k` zeros among the `m` observed tokens.
    pub fn model_b_prediction(&self, m: u32, k: u32) -> f64 {
        assert!(m >= 1, "window length must be >= 1");
        assert!(k <= m, "zero count {k} exceeds window length {m}");
        self.log_predictions(m, k).0.exp()
    }

    /// Signed offset of the truncated model's zero-probability from the
    /// true one `w0`, plus `(w0, w1)`. The offset has the closed form
    /// `±(p - q) * exp(lt - ln_norm)`, free of cancellation.
    fn prediction_offset(&self, m: u32, x0: u8, k: u32) -> (f64, f64, f64) {
        let (root0, root1) = self.window_log_likelihoods(m, k);
        let ln_norm = log_sum_exp(root0, root1);
        if x0 == 0 {
            (self.p, self.q, (self.q - self.p) * (root1 - ln_norm).exp())
        } else {
            (self.q, self.p, (self.p - self.q) * (root0 - ln_norm).exp())
        }
    }

    /// `KL(true next-token distribution || model B's prediction)` for a
    /// window starting with `x0` and containing `k` zeros. This is
    /// exactly the loss model B pays beyond model A on that window.
    fn excess_loss_given(&self, m: u32, x0: u8, k: u32) -> f64 {
        let (w0, w1, eps) = self.prediction_offset(m, x0, k);
        if eps.abs() < KL_SERIES_THRESHOLD {
            // KL(w || w + eps) = sum_{j>=2} eps^j/j * ((-1)^j/w0^(j-1) + 1/w1^(j-1));
            // three terms leave a relative error of O(eps^3).
            let e2 = eps * eps;
            e2 / 2.0 * (1.0 / w0 + 1.0 / w1)
                + e2 * eps / 3.0 * (1.0 / (w1 * w1) - 1.0 / (w0 * w0))
                + e2 * e2 / 4.0 * (1.0 / (w0 * w0 * w0) + 1.0 / (w1 * w1 * w1))
        } else {
            -w0 * (eps / w0).ln_1p() - w1 * (-eps / w1).ln_1p()
        }
    }

    fn check_window(&self, m: u32, x0: u8, k: u32) {
        assert!(m >= 1, "window length must be >= 1");
        assert!(x0 <= 1, "x0 must be 0 or 1");
        assert!(k <= m, "zero count {k} exceeds window length {m}");
        if x0 == 0 {
            assert!(k >= 1, "a window starting with 0 contains at least one zero");
        } else {
            assert!(k < m, "a window starting with 1 contains at most {} zeros", m - 1);
        }
    }

    /// Expected cross-entropy loss of the truncated model on windows that
    /// start with `x0` and contain `k` zeros (the `k` count includes
    /// `x0` itself).
    pub fn model_b_loss_given(&self, m: u32, x0: u8, k: u32) -> f64 {
        self.check_window(m, x0, k);
        self.model_a_loss() + self.excess_loss_given(m, x0, k)
    }

    /// Expected excess of model B over model A at position `m`: the
    /// binomially weighted average of the per-window KL terms. Strictly
    /// positive for `p != 0.5`, exactly zero at `p = 0.5`.
    fn expected_excess(&self, m: u32) -> Result<f64> {
        if m == 0 {
            return Err(Error::Config("token position m must be >= 1".into()));
        }
        if m > MAX_EXACT_M {
            return Err(Error::Capacity(format!(
                "exact summation capped at m = {MAX_EXACT_M}, got {m}"
            )));
        }
        let mut total = KahanSum::default();
        for x0 in 0..2u8 {
            // Probability that a non-root window token is zero / one.
            let (ln_zero, ln_one) = if x0 == 0 {
                (self.ln_p, self.ln_q)
            } else {
                (self.ln_q, self.ln_p)
            };
            let mut ln_binom = 0.0f64;
            for h in 0..m {
                let k = h + 1 - x0 as u32;
                let weight =
                    (ln_binom + h as f64 * ln_zero + (m - 1 - h) as f64 * ln_one).exp();
                total.add(weight * self.excess_loss_given(m, x0, k));
                // C(m-1, h+1) from C(m-1, h).
                ln_binom += ((m - 1 - h) as f64).ln() - ((h + 1) as f64).ln();
            }
        }
        Ok(total.value() / 2.0)
    }

    /// Expected loss of the truncated model at position `m`, by exact
    /// summation over all windows.
    pub fn model_b_expected_loss(&self, m: u32) -> Result<f64> {
        Ok(self.model_a_loss() + self.expected_excess(m)?)
    }

    /// `(model_b_expected_loss - model_a_loss) / model_a_loss`.
    pub fn relative_increase(&self, m: u32) -> Result<f64> {
        Ok(self.expected_excess(m)? / self.model_a_loss())
    }

    /// Simulates the process `trials` times: draw a root, a window of `m`
    /// tokens, and the next token; score the truncated model's predicted
    /// log probability on the outcome. The estimate converges on
    /// [`model_b_expected_loss`](Self::model_b_expected_loss) and serves
    /// as its independent check.
    pub fn simulate_model_b_loss(
        &self,
        m: u32,
        trials: u64,
        seed: u64,
    ) -> MonteCarloEstimate {
        assert!(m >= 1 && trials >= 2);
        let mut log_p0 = Vec::with_capacity(m as usize + 1);
        let mut log_p1 = Vec::with_capacity(m as usize + 1);
        for k in 0..=m {
            let (lp0, lp1) = self.log_predictions(m, k);
            log_p0.push(lp0);
            log_p1.push(lp1);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sum = KahanSum::default();
        let mut sum_sq = KahanSum::default();
        for _ in 0..trials {
            let root_is_zero = rng.random_bool(0.5);
            let mut zeros = root_is_zero as u32;
            for _ in 1..m {
                let token_is_zero = rng.random_bool(self.p) == root_is_zero;
                zeros += token_is_zero as u32;
            }
            let outcome_is_zero = rng.random_bool(self.p) == root_is_zero;
            let loss = -if outcome_is_zero {
                log_p0[zeros as usize]
            } else {
                log_p1[zeros as usize]
            };
            sum.add(loss);
            sum_sq.add(loss * loss);
        }
        let n = trials as f64;
        let mean = sum.value() / n;
        let variance = ((sum_sq.value() - n * mean * mean) / (n - 1.0)).max(0.0);
        MonteCarloEstimate {
            mean,
            std_err: (variance / n).sqrt(),
            trials,
        }
    }
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[derive(Debug, Default)]
struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}
