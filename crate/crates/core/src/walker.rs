//! Markov-chain machinery driving every estimator.
//!
//! The chain starts in column `ℓ₀` with probability proportional to
//! `‖C_ℓ₀‖₂` and moves from `i` to `j` with probability
//! `t_ij = |a_ij| / Σ_k |a_ik|`.  Along the walk the weight
//! `W^(k+1) = W^(k) · a_ij / t_ij` corrects for the sampling bias.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::CoefficientStream;
use crate::sparsemat::SparseMatrix;

/// Default hard cap on the number of steps of a single walk.
pub const DEFAULT_MAX_STEPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Total walk budget `N_s`.
    pub samples: u64,
    /// Relative weight cutoff `W_c`: a walk stops once `|W^(k)| <= W_c |W^(0)|`.
    pub cutoff: f64,
    /// Hard step cap.
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            samples: 1_000_000,
            cutoff: 1e-6,
            max_steps: DEFAULT_MAX_STEPS,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn new(samples: u64, cutoff: f64, seed: u64) -> Self {
        WalkConfig {
            samples,
            cutoff,
            seed,
            ..WalkConfig::default()
        }
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < 1 {
            return Err(Error::invalid("walk budget must be at least 1"));
        }
        if !(self.cutoff > 0.0 && self.cutoff < 1.0) {
            return Err(Error::invalid(format!(
                "weight cutoff must lie in (0, 1), got {}",
                self.cutoff
            )));
        }
        if self.max_steps < 1 {
            return Err(Error::invalid("step cap must be at least 1"));
        }
        Ok(())
    }
}

/// Sampling tables for the transition matrix `T` and the initial
/// distribution `p`.
#[derive(Debug, Clone)]
pub struct TransitionModel<'a> {
    matrix: &'a SparseMatrix,
    // Aligned with the CSR arrays of `matrix`.
    row_cdf: Vec<f64>,
    weight_factor: Vec<f64>,
    col_norms: Vec<f64>,
    init_prob: Vec<f64>,
    init_cdf: Vec<f64>,
}

/// A sampled move of the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub next: usize,
    /// `a_ij / t_ij` for the chosen entry.
    pub factor: f64,
}

impl<'a> TransitionModel<'a> {
    pub fn new(matrix: &'a SparseMatrix) -> Result<Self> {
        let n = matrix.n();
        let mut row_cdf = vec![0.0; matrix.nnz()];
        let mut weight_factor = vec![0.0; matrix.nnz()];
        for i in 0..n {
            let (_, vals) = matrix.row(i);
            if vals.is_empty() {
                continue;
            }
            let offset = matrix.row_offset(i);
            let total: f64 = vals.iter().map(|v| v.abs()).sum();
            let mut acc = 0.0;
            for (k, &v) in vals.iter().enumerate() {
                acc += v.abs();
                row_cdf[offset + k] = acc / total;
                // a / (|a| / s) = sign(a) s, kept exact for unweighted rows.
                weight_factor[offset + k] = total.copysign(v);
            }
            row_cdf[offset + vals.len() - 1] = 1.0;
        }

        let col_norms = matrix.col_norms();
        let total: f64 = col_norms.iter().sum();
        if !(total > 0.0) {
            return Err(Error::degenerate(
                "every column is zero; initial distribution undefined",
            ));
        }
        let init_prob: Vec<f64> = col_norms.iter().map(|c| c / total).collect();
        let mut init_cdf = Vec::with_capacity(n);
        let mut acc = 0.0;
        for c in &col_norms {
            acc += c;
            init_cdf.push(acc / total);
        }
        // Pin the tail to exactly 1 from the last nonzero column on, so no
        // draw can land on a trailing zero-probability column.
        let last = col_norms.iter().rposition(|&c| c > 0.0).expect("total > 0");
        init_cdf[last..].iter_mut().for_each(|c| *c = 1.0);

        Ok(TransitionModel {
            matrix,
            row_cdf,
            weight_factor,
            col_norms,
            init_prob,
            init_cdf,
        })
    }

    pub fn matrix(&self) -> &'a SparseMatrix {
        self.matrix
    }

    /// Cumulative transition probabilities over the stored columns of row `i`.
    pub fn row_cdf(&self, i: usize) -> &[f64] {
        let start = self.matrix.row_offset(i);
        &self.row_cdf[start..start + self.matrix.row_nnz(i)]
    }

    /// `a_ij / t_ij` for every stored entry of row `i`.
    pub fn weight_factors(&self, i: usize) -> &[f64] {
        let start = self.matrix.row_offset(i);
        &self.weight_factor[start..start + self.matrix.row_nnz(i)]
    }

    /// Transition probabilities `t_ij` of row `i`, aligned with its stored columns.
    pub fn transition_probs(&self, i: usize) -> Vec<f64> {
        let cdf = self.row_cdf(i);
        cdf.iter()
            .scan(0.0, |prev, &c| {
                let p = c - *prev;
                *prev = c;
                Some(p)
            })
            .collect()
    }

    pub fn col_norms(&self) -> &[f64] {
        &self.col_norms
    }

    /// Initial distribution `p_j = ‖C_j‖₂ / Σ_k ‖C_k‖₂`.
    pub fn init_prob(&self) -> &[f64] {
        &self.init_prob
    }

    pub fn init_cdf(&self) -> &[f64] {
        &self.init_cdf
    }

    #[inline]
    pub fn is_absorbing(&self, i: usize) -> bool {
        self.matrix.row_nnz(i) == 0
    }

    /// Inverse-CDF move from `state` for a uniform draw `u ∈ [0, 1)`.
    ///
    /// Returns `None` when `state` is absorbing.
    #[inline]
    pub fn step_with_draw(&self, state: usize, u: f64) -> Option<Transition> {
        let start = self.matrix.row_offset(state);
        let len = self.matrix.row_nnz(state);
        if len == 0 {
            return None;
        }
        let cdf = &self.row_cdf[start..start + len];
        let k = cdf.partition_point(|&c| c <= u).min(len - 1);
        let (cols, _) = self.matrix.row(state);
        Some(Transition {
            next: cols[k],
            factor: self.weight_factor[start + k],
        })
    }

    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> Option<Transition> {
        if self.is_absorbing(state) {
            return None;
        }
        self.step_with_draw(state, rng.gen::<f64>())
    }

    /// Draws a starting column from the initial distribution.
    pub fn sample_start<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        self.init_cdf.partition_point(|&c| c <= u).min(self.init_cdf.len() - 1)
    }
}

/// Splits `samples` walks over the columns proportionally to `weights`.
///
/// Each column receives `floor(p_i N)`; the remaining walks go to the largest
/// fractional parts (ties to the lower index) so that the total is exactly
/// `samples`.  Zero-weight columns receive nothing.
pub fn allocate_walks(weights: &[f64], samples: u64) -> Vec<u64> {
    let total: f64 = weights.iter().filter(|w| **w > 0.0).sum();
    let mut counts = vec![0u64; weights.len()];
    if !(total > 0.0) || samples == 0 {
        return counts;
    }
    let mut fractions: Vec<(usize, f64)> = Vec::new();
    let mut assigned = 0u64;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        let exact = w / total * samples as f64;
        let base = exact.floor();
        counts[i] = base as u64;
        assigned += counts[i];
        fractions.push((i, exact - base));
    }
    // Rounding in `exact` can over-assign by a walk or two on huge budgets.
    while assigned > samples {
        let i = fractions
            .iter()
            .filter(|(i, _)| counts[*i] > 0)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|&(i, _)| i)
            .expect("over-assignment implies a nonzero count");
        counts[i] -= 1;
        assigned -= 1;
    }
    fractions.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut remaining = samples - assigned;
    while remaining > 0 {
        for &(i, _) in &fractions {
            if remaining == 0 {
                break;
            }
            counts[i] += 1;
            remaining -= 1;
        }
    }
    counts
}

/// Receives the weighted visits of a walk.
pub trait WalkSink {
    /// Called once per accepted step with `ζ_{k+offset} W^(k)`.
    fn emit(&mut self, step: usize, state: usize, weight: f64);
}

impl<F: FnMut(usize, usize, f64)> WalkSink for F {
    #[inline]
    fn emit(&mut self, step: usize, state: usize, weight: f64) {
        self(step, state, weight)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WalkOutcome {
    /// Number of emitted steps.
    pub steps: usize,
    /// The walk hit the step cap with its weight still above the cutoff.
    pub truncated: bool,
}

/// Runs one walk from `start` with initial weight `initial_weight`.
///
/// Step `k` emits `ζ_{k+coeff_offset} · W^(k)` while `|W^(k)| > W_c |W^(0)|`
/// and `k < max_steps`; the walk also ends when it enters an absorbing row or
/// the emitted term underflows to zero.
#[allow(clippy::too_many_arguments)]
pub fn run_walk<S, R, K>(
    model: &TransitionModel<'_>,
    coeffs: &S,
    start: usize,
    initial_weight: f64,
    coeff_offset: usize,
    config: &WalkConfig,
    rng: &mut R,
    sink: &mut K,
) -> WalkOutcome
where
    S: CoefficientStream,
    R: Rng + ?Sized,
    K: WalkSink + ?Sized,
{
    let threshold = config.cutoff * initial_weight.abs();
    // The emitted term ζ_k W^(k) is carried as one product so that a growing
    // weight and a vanishing coefficient never meet as inf * 0.
    let mut index = coeff_offset;
    let mut term = coeffs.coeff(coeff_offset) * initial_weight;
    let mut weight = initial_weight;
    let mut state = start;
    let mut k = 0;
    loop {
        if weight.abs() <= threshold || term == 0.0 {
            return WalkOutcome {
                steps: k,
                truncated: false,
            };
        }
        if k >= config.max_steps {
            return WalkOutcome {
                steps: k,
                truncated: true,
            };
        }
        sink.emit(k, state, term);
        k += 1;
        match model.step(state, rng) {
            Some(t) => {
                state = t.next;
                weight *= t.factor;
                term = coeffs.next_coeff(index, term * t.factor);
                index += 1;
            }
            None => {
                return WalkOutcome {
                    steps: k,
                    truncated: false,
                }
            }
        }
    }
}

/// `max_i (Σ_j |a_ij|)²`; the resolvent series needs this below 1 for bounded variance.
pub fn alpha_diagnostic(a: &SparseMatrix) -> f64 {
    let m = a.norm_inf();
    m * m
}

/// Random stream generator for walks.
pub type WalkRng = ChaCha8Rng;

/// Counter-based substreams: one ChaCha stream per start index, one
/// 2^32-word block of it per walk.  Walk `s` from start `i` therefore sees the
/// same random numbers regardless of scheduling or of how long other walks ran.
#[derive(Debug, Clone)]
pub struct Substreams {
    base: ChaCha8Rng,
}

impl Substreams {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut base = ChaCha8Rng::seed_from_u64(seed);
        base.set_stream(stream);
        Substreams { base }
    }

    pub fn walk(&self, walk: u64) -> WalkRng {
        let mut rng = self.base.clone();
        rng.set_word_pos(u128::from(walk) << 32);
        rng
    }
}
