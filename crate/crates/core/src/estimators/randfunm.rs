//! Row/column-sampling estimators built on `f(A) ≈ ζ₀I + ζ₁A + AQA`.
//!
//! A walk started in column `k` adds `ζ_{j+2} W^(j)` to `q_{k,ℓ_j}` at every
//! step, with `W^(0) = 1/N_k`, so row `k` of `Q` is owned by the walks of
//! column `k` alone.

use rayon::prelude::*;

use super::{
    check_dense_size, subsample_size, with_pool, Accumulation, AtomicF64, EstimatorOptions, FunmResult, Moments,
    Payload, WalkStats,
};
use crate::error::{Error, Result};
use crate::oracle::DenseMatrix;
use crate::series::CoefficientStream;
use crate::sparsemat::SparseMatrix;
use crate::walker::{allocate_walks, run_walk, Substreams, TransitionModel, WalkConfig};

/// Coefficient index emitted at walk step 0.
const Q_COEFF_OFFSET: usize = 2;

struct Ctx<'a, S> {
    a: &'a SparseMatrix,
    model: TransitionModel<'a>,
    coeffs: &'a S,
    config: &'a WalkConfig,
    opts: &'a EstimatorOptions,
}

/// Dense per-worker scratch row of `Q`.
struct Scratch {
    q: Vec<f64>,
    seen: Vec<bool>,
    touched: Vec<usize>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            q: vec![0.0; n],
            seen: vec![false; n],
            touched: Vec::new(),
        }
    }

    #[inline]
    fn add(&mut self, state: usize, w: f64) {
        if !self.seen[state] {
            self.seen[state] = true;
            self.touched.push(state);
        }
        self.q[state] += w;
    }

    fn clear(&mut self) {
        for &s in &self.touched {
            self.q[s] = 0.0;
            self.seen[s] = false;
        }
        self.touched.clear();
    }
}

/// Accumulates row `column` of `Q` into `scratch` (touched states left sorted).
///
/// For a leading subsample of walks it also records, for every `(i, a_ik)` in
/// `tracked`, the per-walk contribution `N_k a_ik Σ_j w_j a_{ℓ_j i}` to the
/// diagonal entry `i`; the returned variances are those of the walk mean.
fn accumulate_q_row<S: CoefficientStream>(
    ctx: &Ctx<'_, S>,
    scratch: &mut Scratch,
    column: usize,
    walks: u64,
    tracked: &[(usize, f64)],
) -> (WalkStats, Vec<f64>) {
    let streams = Substreams::new(ctx.config.seed, column as u64);
    let w0 = 1.0 / walks as f64;
    let track = if tracked.is_empty() {
        0
    } else {
        subsample_size(walks, ctx.opts.error_subsample)
    };
    let mut moments = vec![Moments::default(); tracked.len()];
    let mut emissions: Vec<(usize, f64)> = Vec::new();
    let mut stats = WalkStats::default();

    for s in 0..walks {
        let mut rng = streams.walk(s);
        let outcome = if s < track {
            emissions.clear();
            let mut sink = |_: usize, state: usize, w: f64| {
                scratch.add(state, w);
                emissions.push((state, w));
            };
            let out = run_walk(
                &ctx.model,
                ctx.coeffs,
                column,
                w0,
                Q_COEFF_OFFSET,
                ctx.config,
                &mut rng,
                &mut sink,
            );
            for (m, &(i, a_ik)) in moments.iter_mut().zip(tracked) {
                let inner: f64 = emissions.iter().map(|&(l, w)| w * ctx.a.get(l, i)).sum();
                m.push(walks as f64 * a_ik * inner);
            }
            out
        } else {
            let mut sink = |_: usize, state: usize, w: f64| scratch.add(state, w);
            run_walk(
                &ctx.model,
                ctx.coeffs,
                column,
                w0,
                Q_COEFF_OFFSET,
                ctx.config,
                &mut rng,
                &mut sink,
            )
        };
        stats.record(outcome);
    }
    scratch.touched.sort_unstable();
    let var = moments.iter().map(|m| m.variance() / walks as f64).collect();
    (stats, var)
}

/// `P_k = Q_k A` as a dense row.
fn q_times_a(a: &SparseMatrix, scratch: &Scratch) -> Vec<f64> {
    let mut p = vec![0.0; a.n()];
    for &l in &scratch.touched {
        let ql = scratch.q[l];
        let (cols, vals) = a.row(l);
        for (&j, &v) in cols.iter().zip(vals) {
            p[j] += ql * v;
        }
    }
    p
}

/// `⟨Q_k, C_i⟩`.
#[inline]
fn q_dot_column(a: &SparseMatrix, scratch: &Scratch, i: usize) -> f64 {
    let (rows, vals) = a.col(i);
    rows.iter().zip(vals).map(|(&l, &v)| scratch.q[l] * v).sum()
}

fn column_entries(a: &SparseMatrix, k: usize, requested: Option<&[bool]>) -> Vec<(usize, f64)> {
    let (rows, vals) = a.col(k);
    rows.iter()
        .zip(vals)
        .filter(|(&i, _)| requested.is_none_or(|r| r[i]))
        .map(|(&i, &v)| (i, v))
        .collect()
}

fn h_term_dense<S: CoefficientStream>(a: &SparseMatrix, coeffs: &S) -> DenseMatrix {
    let n = a.n();
    let (z0, z1) = (coeffs.coeff(0), coeffs.coeff(1));
    let mut f = DenseMatrix::identity(n);
    let data = f.as_mut_slice();
    data.iter_mut().for_each(|v| *v *= z0);
    for (i, j, v) in a.triplets() {
        data[i * n + j] += z1 * v;
    }
    f
}

fn h_term_diag<S: CoefficientStream>(a: &SparseMatrix, coeffs: &S) -> Vec<f64> {
    let (z0, z1) = (coeffs.coeff(0), coeffs.coeff(1));
    (0..a.n()).map(|i| z0 + z1 * a.get(i, i)).collect()
}

fn validate_vector(v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::invalid(format!("vector has length {}, expected {n}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("vector entries must be finite"));
    }
    Ok(())
}

/// Full matrix estimate `ζ₀I + ζ₁A + AQA`, assembled one block of `Q` rows
/// at a time.
pub fn rand_funm<S: CoefficientStream>(
    a: &SparseMatrix,
    coeffs: &S,
    config: &WalkConfig,
    opts: &EstimatorOptions,
) -> Result<FunmResult> {
    config.validate()?;
    opts.validate()?;
    let n = a.n();
    check_dense_size(n)?;
    let mut f = h_term_dense(a, coeffs);
    if a.is_empty() {
        return Ok(FunmResult {
            payload: Payload::Full(f),
            std_error: Some(vec![0.0; n]),
            stats: WalkStats::default(),
            config: *config,
        });
    }
    let ctx = Ctx {
        a,
        model: TransitionModel::new(a)?,
        coeffs,
        config,
        opts,
    };
    let budgets = allocate_walks(ctx.model.init_prob(), config.samples);

    let (stats, var) = with_pool(opts.threads, || match opts.accumulation {
        Accumulation::Deterministic => full_deterministic(&ctx, &budgets, &mut f),
        Accumulation::Fast => full_fast(&ctx, &budgets, &mut f),
    })?;
    Ok(FunmResult {
        payload: Payload::Full(f),
        std_error: Some(var.into_iter().map(f64::sqrt).collect()),
        stats,
        config: *config,
    })
}

type ColumnVar = Vec<(usize, f64)>;

fn full_column<S: CoefficientStream>(
    ctx: &Ctx<'_, S>,
    scratch: &mut Scratch,
    k: usize,
    walks: u64,
) -> (Vec<f64>, WalkStats, ColumnVar) {
    let tracked = column_entries(ctx.a, k, None);
    let (stats, var) = accumulate_q_row(ctx, scratch, k, walks, &tracked);
    let p = q_times_a(ctx.a, scratch);
    scratch.clear();
    (p, stats, tracked.iter().map(|t| t.0).zip(var).collect())
}

fn full_deterministic<S: CoefficientStream>(
    ctx: &Ctx<'_, S>,
    budgets: &[u64],
    f: &mut DenseMatrix,
) -> (WalkStats, Vec<f64>) {
    let a = ctx.a;
    let n = a.n();
    let mut stats = WalkStats::default();
    let mut var = vec![0.0; n];
    for b0 in (0..n).step_by(ctx.opts.block_size) {
        let b1 = (b0 + ctx.opts.block_size).min(n);
        let block: Vec<(usize, Vec<f64>, WalkStats, ColumnVar)> = (b0..b1)
            .into_par_iter()
            .filter(|&k| budgets[k] > 0)
            .map_init(
                || Scratch::new(n),
                |scratch, k| {
                    let (p, s, v) = full_column(ctx, scratch, k, budgets[k]);
                    (k, p, s, v)
                },
            )
            .collect();
        let mut slot = vec![usize::MAX; b1 - b0];
        for (idx, entry) in block.iter().enumerate() {
            slot[entry.0 - b0] = idx;
            stats.merge(&entry.2);
            for &(i, v) in &entry.3 {
                var[i] += v;
            }
        }
        // Row i of F gains Σ_k a_ik P_k over this block, in ascending k.
        f.as_mut_slice().par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let (cols, vals) = a.row(i);
            let lo = cols.partition_point(|&c| c < b0);
            for (&k, &a_ik) in cols[lo..].iter().zip(&vals[lo..]) {
                if k >= b1 {
                    break;
                }
                let idx = slot[k - b0];
                if idx == usize::MAX {
                    continue;
                }
                row.iter_mut().zip(&block[idx].1).for_each(|(r, p)| *r += a_ik * p);
            }
        });
    }
    (stats, var)
}

fn full_fast<S: CoefficientStream>(ctx: &Ctx<'_, S>, budgets: &[u64], f: &mut DenseMatrix) -> (WalkStats, Vec<f64>) {
    let a = ctx.a;
    let n = a.n();
    let cells: Vec<AtomicF64> = f.as_slice().iter().map(|&v| AtomicF64::new(v)).collect();
    let per_column: Vec<(WalkStats, ColumnVar)> = (0..n)
        .into_par_iter()
        .filter(|&k| budgets[k] > 0)
        .map_init(
            || Scratch::new(n),
            |scratch, k| {
                let (p, s, v) = full_column(ctx, scratch, k, budgets[k]);
                let (rows, vals) = a.col(k);
                for (&i, &a_ik) in rows.iter().zip(vals) {
                    let dst = &cells[i * n..(i + 1) * n];
                    for (cell, &pj) in dst.iter().zip(&p) {
                        if pj != 0.0 {
                            cell.add(a_ik * pj);
                        }
                    }
                }
                (s, v)
            },
        )
        .collect();
    for (dst, cell) in f.as_mut_slice().iter_mut().zip(cells) {
        *dst = cell.into_inner();
    }
    let mut stats = WalkStats::default();
    let mut var = vec![0.0; n];
    for (s, v) in &per_column {
        stats.merge(s);
        for &(i, x) in v {
            var[i] += x;
        }
    }
    (stats, var)
}

/// Diagonal estimate `d_i = ζ₀ + ζ₁a_ii + Σ_k a_ik ⟨Q_k, C_i⟩`, consuming
/// each row `Q_k` as soon as it is complete.
pub fn rand_funm_diag<S: CoefficientStream>(
    a: &SparseMatrix,
    coeffs: &S,
    config: &WalkConfig,
    opts: &EstimatorOptions,
) -> Result<FunmResult> {
    let all: Vec<usize> = (0..a.n()).collect();
    rand_funm_diag_entries(a, coeffs, &all, config, opts)
}

/// Diagonal entries `f(A)_ii` for the requested `indices` only.
///
/// Walks are launched only from columns `k` with `a_ik ≠ 0` for some
/// requested `i`, and the budget is re-normalised over those columns.
pub fn rand_funm_diag_entries<S: CoefficientStream>(
    a: &SparseMatrix,
    coeffs: &S,
    indices: &[usize],
    config: &WalkConfig,
    opts: &EstimatorOptions,
) -> Result<FunmResult> {
    config.validate()?;
    opts.validate()?;
    let n = a.n();
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return Err(Error::invalid(format!("index {bad} out of range for n = {n}")));
    }
    let h = h_term_diag(a, coeffs);
    let pick = |d: &[f64]| indices.iter().map(|&i| d[i]).collect::<Vec<_>>();
    if a.is_empty() {
        return Ok(FunmResult {
            payload: Payload::Diagonal(pick(&h)),
            std_error: Some(vec![0.0; indices.len()]),
            stats: WalkStats::default(),
            config: *config,
        });
    }

    let mut requested = vec![false; n];
    indices.iter().for_each(|&i| requested[i] = true);
    let ctx = Ctx {
        a,
        model: TransitionModel::new(a)?,
        coeffs,
        config,
        opts,
    };
    let weights: Vec<f64> = (0..n)
        .map(|k| {
            let needed = a.col(k).0.iter().any(|&i| requested[i]);
            if needed {
                ctx.model.init_prob()[k]
            } else {
                0.0
            }
        })
        .collect();
    let budgets = allocate_walks(&weights, config.samples);

    let (d, var, stats) = with_pool(opts.threads, || diag_accumulate(&ctx, &budgets, &requested, h))?;
    Ok(FunmResult {
        payload: Payload::Diagonal(pick(&d)),
        std_error: Some(indices.iter().map(|&i| var[i].sqrt()).collect()),
        stats,
        config: *config,
    })
}

type DiagColumn = (usize, Vec<(usize, f64)>, WalkStats, Vec<f64>);

fn diag_column<S: CoefficientStream>(
    ctx: &Ctx<'_, S>,
    scratch: &mut Scratch,
    k: usize,
    walks: u64,
    requested: &[bool],
) -> DiagColumn {
    let tracked = column_entries(ctx.a, k, Some(requested));
    let (stats, var) = accumulate_q_row(ctx, scratch, k, walks, &tracked);
    let contrib = tracked
        .iter()
        .map(|&(i, a_ik)| (i, a_ik * q_dot_column(ctx.a, scratch, i)))
        .collect();
    scratch.clear();
    (k, contrib, stats, var)
}

fn diag_accumulate<S: CoefficientStream>(
    ctx: &Ctx<'_, S>,
    budgets: &[u64],
    requested: &[bool],
    mut d: Vec<f64>,
) -> (Vec<f64>, Vec<f64>, WalkStats) {
    let n = ctx.a.n();
    let mut var = vec![0.0; n];
    let mut stats = WalkStats::default();
    let mut absorb_stats = |cols: &[DiagColumn], var: &mut Vec<f64>| {
        for (_, contrib, s, v) in cols {
            stats.merge(s);
            for (&(i, _), x) in contrib.iter().zip(v) {
                var[i] += x;
            }
        }
    };
    match ctx.opts.accumulation {
        Accumulation::Deterministic => {
            for b0 in (0..n).step_by(ctx.opts.block_size) {
                let b1 = (b0 + ctx.opts.block_size).min(n);
                let block: Vec<DiagColumn> = (b0..b1)
                    .into_par_iter()
                    .filter(|&k| budgets[k] > 0)
                    .map_init(
                        || Scratch::new(n),
                        |scratch, k| diag_column(ctx, scratch, k, budgets[k], requested),
                    )
                    .collect();
                for (_, contrib, _, _) in &block {
                    for &(i, c) in contrib {
                        d[i] += c;
                    }
                }
                absorb_stats(&block, &mut var);
            }
        }
        Accumulation::Fast => {
            let cells: Vec<AtomicF64> = d.iter().map(|&v| AtomicF64::new(v)).collect();
            let cols: Vec<DiagColumn> = (0..n)
                .into_par_iter()
                .filter(|&k| budgets[k] > 0)
                .map_init(
                    || Scratch::new(n),
                    |scratch, k| {
                        let col = diag_column(ctx, scratch, k, budgets[k], requested);
                        for &(i, c) in &col.1 {
                            cells[i].add(c);
                        }
                        col
                    },
                )
                .collect();
            d = cells.into_iter().map(AtomicF64::into_inner).collect();
            absorb_stats(&cols, &mut var);
        }
    }
    (d, var, stats)
}

/// Walk sums `q_k = Σ_walks Σ_j ζ_{j+2} W^(j) r_{ℓ_j}` for one column, with
/// the variance of that mean.
fn action_column<S: CoefficientStream>(ctx: &Ctx<'_, S>, r: &[f64], k: usize, walks: u64) -> (f64, f64, WalkStats) {
    let streams = Substreams::new(ctx.config.seed, k as u64);
    let w0 = 1.0 / walks as f64;
    let mut q = 0.0;
    let mut moments = Moments::default();
    let mut stats = WalkStats::default();
    for s in 0..walks {
        let mut rng = streams.walk(s);
        let mut walk_sum = 0.0;
        let mut sink = |_: usize, state: usize, w: f64| {
            let c = w * r[state];
            q += c;
            walk_sum += c;
        };
        let out = run_walk(
            &ctx.model,
            ctx.coeffs,
            k,
            w0,
            Q_COEFF_OFFSET,
            ctx.config,
            &mut rng,
            &mut sink,
        );
        stats.record(out);
        moments.push(walk_sum * walks as f64);
    }
    (q, moments.variance() / walks as f64, stats)
}

/// Action estimate `y = ζ₀v + ζ₁r + Aq` with `r = Av`.
///
/// Each `q_k` is written only by the walks of column `k`, so both
/// accumulation modes produce the same result here.
pub fn rand_funm_action<S: CoefficientStream>(
    a: &SparseMatrix,
    coeffs: &S,
    v: &[f64],
    config: &WalkConfig,
    opts: &EstimatorOptions,
) -> Result<FunmResult> {
    config.validate()?;
    opts.validate()?;
    let n = a.n();
    validate_vector(v, n)?;
    let (z0, z1) = (coeffs.coeff(0), coeffs.coeff(1));
    if a.is_empty() {
        return Ok(FunmResult {
            payload: Payload::Action(v.iter().map(|x| z0 * x).collect()),
            std_error: Some(vec![0.0; n]),
            stats: WalkStats::default(),
            config: *config,
        });
    }
    let r = a.mul_vec(v);
    let ctx = Ctx {
        a,
        model: TransitionModel::new(a)?,
        coeffs,
        config,
        opts,
    };
    let budgets = allocate_walks(ctx.model.init_prob(), config.samples);
    let columns: Vec<(f64, f64, WalkStats)> = with_pool(opts.threads, || {
        (0..n)
            .into_par_iter()
            .map(|k| {
                if budgets[k] == 0 {
                    (0.0, 0.0, WalkStats::default())
                } else {
                    action_column(&ctx, &r, k, budgets[k])
                }
            })
            .collect()
    })?;

    let q: Vec<f64> = columns.iter().map(|c| c.0).collect();
    let aq = a.mul_vec(&q);
    let y: Vec<f64> = (0..n).map(|i| z0 * v[i] + z1 * r[i] + aq[i]).collect();
    let se: Vec<f64> = (0..n)
        .map(|i| {
            let (cols, vals) = a.row(i);
            cols.iter()
                .zip(vals)
                .map(|(&k, &a_ik)| a_ik * a_ik * columns[k].1)
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let mut stats = WalkStats::default();
    columns.iter().for_each(|c| stats.merge(&c.2));
    Ok(FunmResult {
        payload: Payload::Action(y),
        std_error: Some(se),
        stats,
        config: *config,
    })
}

/// Single entry `(f(A)v)_i = ζ₀v_i + ζ₁r_i + ⟨R_i, q⟩`.
///
/// Only the columns `j` with `a_ij ≠ 0` are read by the final inner product,
/// so the whole budget is spread over those columns.
pub fn rand_funm_entry<S: CoefficientStream>(
    a: &SparseMatrix,
    coeffs: &S,
    v: &[f64],
    i: usize,
    config: &WalkConfig,
    opts: &EstimatorOptions,
) -> Result<FunmResult> {
    config.validate()?;
    opts.validate()?;
    let n = a.n();
    validate_vector(v, n)?;
    if i >= n {
        return Err(Error::invalid(format!("index {i} out of range for n = {n}")));
    }
    let (z0, z1) = (coeffs.coeff(0), coeffs.coeff(1));
    let (cols, vals) = a.row(i);
    if cols.is_empty() {
        return Ok(FunmResult {
            payload: Payload::Entry {
                index: i,
                value: z0 * v[i],
            },
            std_error: Some(vec![0.0]),
            stats: WalkStats::default(),
            config: *config,
        });
    }
    let r = a.mul_vec(v);
    let ctx = Ctx {
        a,
        model: TransitionModel::new(a)?,
        coeffs,
        config,
        opts,
    };
    let weights: Vec<f64> = cols.iter().map(|&j| ctx.model.init_prob()[j]).collect();
    let budgets = allocate_walks(&weights, config.samples);
    let columns: Vec<(f64, f64, WalkStats)> = with_pool(opts.threads, || {
        cols.par_iter()
            .zip(budgets.par_iter())
            .map(|(&j, &walks)| {
                if walks == 0 {
                    (0.0, 0.0, WalkStats::default())
                } else {
                    action_column(&ctx, &r, j, walks)
                }
            })
            .collect()
    })?;

    let mut value = z0 * v[i] + z1 * r[i];
    let mut var = 0.0;
    let mut stats = WalkStats::default();
    for (&a_ij, (q, vq, s)) in vals.iter().zip(&columns) {
        value += a_ij * q;
        var += a_ij * a_ij * vq;
        stats.merge(s);
    }
    Ok(FunmResult {
        payload: Payload::Entry { index: i, value },
        std_error: Some(vec![var.sqrt()]),
        stats,
        config: *config,
    })
}
