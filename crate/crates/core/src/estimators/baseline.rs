//! Classical Monte Carlo: every walk starts at a fixed row `i` and adds
//! `ζ_k W^(k)` to the single entry `f_{i,ℓ_k}` at each step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_dense_size, with_pool, EstimatorOptions, FunmResult, Moments, Payload, WalkStats};
use crate::error::{Error, Result};
use crate::oracle::DenseMatrix;
use crate::series::CoefficientStream;
use crate::sparsemat::SparseMatrix;
use crate::walker::{allocate_walks, run_walk, Substreams, TransitionModel, WalkConfig};

// Keeps the baseline's substreams disjoint from the column-sampling estimators'.
const STREAM_TAG: u64 = 1 << 63;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum McMode {
    Full,
    /// Computes every entry but keeps only the diagonal.
    Diag,
    Action(Vec<f64>),
    Entry {
        v: Vec<f64>,
        index: usize,
    },
}

/// How `WalkConfig::samples` is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum McBudget {
    /// `samples` walks from every row (total `n · samples`).
    #[default]
    PerRow,
    /// `samples` walks in total, split evenly over the rows that are evaluated.
    Global,
}

enum RowTarget<'v> {
    Full,
    Diag,
    Action(&'v [f64]),
}

struct RowResult {
    // Dense row for `Full`, single value otherwise.
    row: Vec<f64>,
    value: f64,
    variance: f64,
    stats: WalkStats,
}

fn run_row<S: CoefficientStream>(
    model: &TransitionModel<'_>,
    coeffs: &S,
    config: &WalkConfig,
    i: usize,
    walks: u64,
    target: &RowTarget<'_>,
) -> RowResult {
    let n = model.matrix().n();
    let streams = Substreams::new(config.seed, STREAM_TAG | i as u64);
    let w0 = 1.0 / walks as f64;
    let mut row = if matches!(target, RowTarget::Full) {
        vec![0.0; n]
    } else {
        Vec::new()
    };
    let mut value = 0.0;
    let mut moments = Moments::default();
    let mut stats = WalkStats::default();
    for s in 0..walks {
        let mut rng = streams.walk(s);
        let mut walk_sum = 0.0;
        let mut sink = |_: usize, state: usize, w: f64| match target {
            RowTarget::Full => {
                row[state] += w;
                if state == i {
                    walk_sum += w;
                }
            }
            RowTarget::Diag => {
                if state == i {
                    value += w;
                    walk_sum += w;
                }
            }
            RowTarget::Action(v) => {
                let c = w * v[state];
                value += c;
                walk_sum += c;
            }
        };
        stats.record(run_walk(model, coeffs, i, w0, 0, config, &mut rng, &mut sink));
        moments.push(walk_sum * walks as f64);
    }
    if matches!(target, RowTarget::Full) {
        value = row[i];
    }
    RowResult {
        row,
        value,
        variance: moments.variance() / walks as f64,
        stats,
    }
}

/// Classical Monte Carlo estimate in the requested `mode`.
pub fn mc_baseline<S: CoefficientStream>(
    a: &SparseMatrix,
    coeffs: &S,
    config: &WalkConfig,
    mode: &McMode,
    budget: McBudget,
    opts: &EstimatorOptions,
) -> Result<FunmResult> {
    config.validate()?;
    let n = a.n();
    let z0 = coeffs.coeff(0);
    let rows: Vec<usize> = match mode {
        McMode::Entry { v, index } => {
            if *index >= n {
                return Err(Error::invalid(format!("index {index} out of range for n = {n}")));
            }
            check_len(v, n)?;
            vec![*index]
        }
        McMode::Action(v) => {
            check_len(v, n)?;
            (0..n).collect()
        }
        McMode::Full => {
            check_dense_size(n)?;
            (0..n).collect()
        }
        McMode::Diag => (0..n).collect(),
    };

    if a.is_empty() {
        let payload = match mode {
            McMode::Full => {
                let mut m = DenseMatrix::identity(n);
                m.as_mut_slice().iter_mut().for_each(|x| *x *= z0);
                Payload::Full(m)
            }
            McMode::Diag => Payload::Diagonal(vec![z0; n]),
            McMode::Action(v) => Payload::Action(v.iter().map(|x| z0 * x).collect()),
            McMode::Entry { v, index } => Payload::Entry {
                index: *index,
                value: z0 * v[*index],
            },
        };
        let tracked = if matches!(mode, McMode::Entry { .. }) { 1 } else { n };
        return Ok(FunmResult {
            payload,
            std_error: Some(vec![0.0; tracked]),
            stats: WalkStats::default(),
            config: *config,
        });
    }

    let model = TransitionModel::new(a)?;
    let walks: Vec<u64> = match budget {
        McBudget::PerRow => vec![config.samples; rows.len()],
        McBudget::Global => allocate_walks(&vec![1.0; rows.len()], config.samples),
    };
    let target = match mode {
        McMode::Full => RowTarget::Full,
        McMode::Diag => RowTarget::Diag,
        McMode::Action(v) | McMode::Entry { v, .. } => RowTarget::Action(v),
    };

    let results: Vec<RowResult> = with_pool(opts.threads, || {
        rows.par_iter()
            .zip(walks.par_iter())
            .map(|(&i, &w)| {
                if w == 0 {
                    RowResult {
                        row: if matches!(target, RowTarget::Full) {
                            vec![0.0; n]
                        } else {
                            Vec::new()
                        },
                        value: 0.0,
                        variance: 0.0,
                        stats: WalkStats::default(),
                    }
                } else {
                    run_row(&model, coeffs, config, i, w, &target)
                }
            })
            .collect()
    })?;

    let mut stats = WalkStats::default();
    results.iter().for_each(|r| stats.merge(&r.stats));
    let std_error = Some(results.iter().map(|r| r.variance.sqrt()).collect());
    let payload = match mode {
        McMode::Full => {
            let data = results.into_iter().flat_map(|r| r.row).collect();
            Payload::Full(DenseMatrix::from_row_major(n, data)?)
        }
        McMode::Diag => Payload::Diagonal(results.iter().map(|r| r.value).collect()),
        McMode::Action(_) => Payload::Action(results.iter().map(|r| r.value).collect()),
        McMode::Entry { index, .. } => Payload::Entry {
            index: *index,
            value: results[0].value,
        },
    };
    Ok(FunmResult {
        payload,
        std_error,
        stats,
        config: *config,
    })
}

fn check_len(v: &[f64], n: usize) -> Result<()> {
    if v.len() != n || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("vector must hold {n} finite values")));
    }
    Ok(())
}
