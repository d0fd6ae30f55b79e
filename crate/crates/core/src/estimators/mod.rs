//! The randomized evaluators and the classical Monte Carlo baseline.
//!
//! Every estimator allocates its walk budget up front and runs each start
//! index's walks on its own counter-based substream, so the set of walks is
//! a pure function of `(seed, budget)`.  What differs between the two
//! [`Accumulation`] modes is only how contributions that several start
//! indices write to the same output are summed.

mod baseline;
mod randfunm;

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

pub use baseline::{mc_baseline, McBudget, McMode};
pub use randfunm::{rand_funm, rand_funm_action, rand_funm_diag, rand_funm_diag_entries, rand_funm_entry};

use crate::error::{Error, Result};
use crate::oracle::DenseMatrix;
use crate::walker::WalkConfig;

/// Largest `n²` for which a dense result is materialised.
pub const MAX_DENSE_ENTRIES: usize = 1 << 27;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Accumulation {
    /// Private per-start accumulators reduced in a fixed order; results are
    /// independent of the worker count.
    #[default]
    Deterministic,
    /// Shared accumulators updated with atomic adds; reproducible only up to
    /// floating-point reassociation.
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    pub accumulation: Accumulation,
    /// Worker threads; 0 uses the ambient rayon pool.
    pub threads: usize,
    /// Rows of `Q` kept live at once.
    pub block_size: usize,
    /// Fraction of walks per start index used for standard-error estimates
    /// where the per-walk contribution is expensive to track.
    pub error_subsample: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            accumulation: Accumulation::Deterministic,
            threads: 0,
            block_size: 1024,
            error_subsample: 0.01,
        }
    }
}

impl EstimatorOptions {
    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn with_accumulation(mut self, accumulation: Accumulation) -> Self {
        self.accumulation = accumulation;
        self
    }

    pub fn with_block_size(mut self, block_size: usize) -> Self {
        self.block_size = block_size;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.block_size == 0 {
            return Err(Error::invalid("block size must be positive"));
        }
        if !(self.error_subsample > 0.0 && self.error_subsample <= 1.0) {
            return Err(Error::invalid("error subsample fraction must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WalkStats {
    pub walks: u64,
    /// Total emitted steps over all walks.
    pub steps: u64,
    /// Walks stopped by the step cap.
    pub truncations: u64,
}

impl WalkStats {
    pub fn mean_steps(&self) -> f64 {
        if self.walks == 0 {
            0.0
        } else {
            self.steps as f64 / self.walks as f64
        }
    }

    fn record(&mut self, outcome: crate::walker::WalkOutcome) {
        self.walks += 1;
        self.steps += outcome.steps as u64;
        self.truncations += u64::from(outcome.truncated);
    }

    fn merge(&mut self, other: &WalkStats) {
        self.walks += other.walks;
        self.steps += other.steps;
        self.truncations += other.truncations;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum Payload {
    Full(DenseMatrix),
    Diagonal(Vec<f64>),
    Action(Vec<f64>),
    Entry { index: usize, value: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunmResult {
    pub payload: Payload,
    /// Estimated standard error per tracked output: the diagonal for full and
    /// diagonal results, every entry for actions, the single value for entries.
    pub std_error: Option<Vec<f64>>,
    pub stats: WalkStats,
    pub config: WalkConfig,
}

impl FunmResult {
    pub fn full(&self) -> Option<&DenseMatrix> {
        match &self.payload {
            Payload::Full(m) => Some(m),
            _ => None,
        }
    }

    /// The tracked vector: the diagonal of a full result, the diagonal or the
    /// action vector, or the single entry.
    pub fn values(&self) -> Vec<f64> {
        match &self.payload {
            Payload::Full(m) => m.diag(),
            Payload::Diagonal(d) => d.clone(),
            Payload::Action(y) => y.clone(),
            Payload::Entry { value, .. } => vec![*value],
        }
    }

    pub fn entry(&self) -> Option<f64> {
        match self.payload {
            Payload::Entry { value, .. } => Some(value),
            _ => None,
        }
    }

    /// Largest reported standard error, 0 when none were tracked.
    pub fn max_std_error(&self) -> f64 {
        self.std_error
            .as_ref()
            .map_or(0.0, |se| se.iter().fold(0.0, |m: f64, s| m.max(*s)))
    }
}

/// Runs `f` on a dedicated pool when a thread count is requested.
pub(crate) fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Resource(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

pub(crate) fn check_dense_size(n: usize) -> Result<()> {
    if n.checked_mul(n).is_none_or(|sq| sq > MAX_DENSE_ENTRIES) {
        return Err(Error::Resource(format!(
            "a dense {n}x{n} result exceeds {MAX_DENSE_ENTRIES} entries; use the diagonal or action estimators"
        )));
    }
    Ok(())
}

/// Lock-free `f64` accumulator cell.
pub(crate) struct AtomicF64(AtomicU64);

impl AtomicF64 {
    pub(crate) fn new(v: f64) -> Self {
        AtomicF64(AtomicU64::new(v.to_bits()))
    }

    #[inline]
    pub(crate) fn add(&self, v: f64) {
        let mut cur = self.0.load(Ordering::Relaxed);
        loop {
            let next = (f64::from_bits(cur) + v).to_bits();
            match self
                .0
                .compare_exchange_weak(cur, next, Ordering::Relaxed, Ordering::Relaxed)
            {
                Ok(_) => return,
                Err(actual) => cur = actual,
            }
        }
    }

    pub(crate) fn into_inner(self) -> f64 {
        f64::from_bits(self.0.into_inner())
    }
}

/// Streaming mean/variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    #[inline]
    pub(crate) fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Unbiased sample variance, 0 with fewer than two samples.
    pub(crate) fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }
}

/// Number of walks out of `walks` tracked for variance estimates.
pub(crate) fn subsample_size(walks: u64, fraction: f64) -> u64 {
    if walks < 2 {
        return 0;
    }
    ((walks as f64 * fraction).ceil() as u64).clamp(2, walks)
}
