//! Convergence sweeps and head-to-head method comparisons.
//!
//! Errors are relative ℓ∞: `max |x̂ - x| / max |x|` over every tracked
//! output, measured against the dense series oracle when the instance is
//! small enough, or against a designated high-budget run otherwise.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::centrality::top_correlation;
use crate::error::{Error, Result};
use crate::estimators::{
    mc_baseline, rand_funm, rand_funm_action, rand_funm_diag, EstimatorOptions, FunmResult, McBudget, McMode, WalkStats,
};
use crate::oracle::{cg_solve, dense_funm, DEFAULT_EXP_TERMS, MAX_DENSE_N};
use crate::series::MatrixFunction;
use crate::sparsemat::SparseMatrix;
use crate::walker::WalkConfig;

// Reference runs use a seed far from any swept seed.
const REFERENCE_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// The output an experiment measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// Every entry of `f(A)`.
    Full,
    Diagonal,
    Action(Vec<f64>),
}

impl Target {
    pub fn name(&self) -> &'static str {
        match self {
            Target::Full => "full",
            Target::Diagonal => "diagonal",
            Target::Action(_) => "action",
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        match self {
            Target::Action(v) if v.len() != n => Err(Error::invalid(format!(
                "action vector has length {}, expected {n}",
                v.len()
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "parameter", content = "values")]
pub enum Sweep {
    Samples(Vec<u64>),
    /// Ordered from coarse to fine.
    Cutoff(Vec<f64>),
}

impl Sweep {
    fn len(&self) -> usize {
        match self {
            Sweep::Samples(v) => v.len(),
            Sweep::Cutoff(v) => v.len(),
        }
    }

    fn config(&self, i: usize, base: &WalkConfig) -> (f64, WalkConfig) {
        let mut cfg = *base;
        match self {
            Sweep::Samples(v) => {
                cfg.samples = v[i];
                (v[i] as f64, cfg)
            }
            Sweep::Cutoff(v) => {
                cfg.cutoff = v[i];
                (v[i], cfg)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// Dense truncated series with this many terms.
    Oracle { terms: usize },
    /// The same estimator with this many walks and an independent seed.
    Run { samples: u64 },
}

impl Default for Reference {
    fn default() -> Self {
        Reference::Oracle {
            terms: DEFAULT_EXP_TERMS,
        }
    }
}

/// Relative ℓ∞ error; absolute when the reference is identically zero.
pub fn relative_linf_error(estimate: &[f64], exact: &[f64]) -> f64 {
    let diff = estimate
        .iter()
        .zip(exact)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = exact.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Least-squares slope of `ln y` against `ln x`; `None` without two distinct
/// abscissae or with a non-positive value.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Start of the trailing plateau: the first index from which every error
/// stays within `2 × noise` of the last one.
pub fn detect_knee(errors: &[f64], noise: &[f64]) -> Option<usize> {
    let last = *errors.last()?;
    let last_noise = *noise.last()?;
    let mut knee = errors.len() - 1;
    while knee > 0 {
        let j = knee - 1;
        if (errors[j] - last).abs() > 2.0 * noise[j].max(last_noise) {
            break;
        }
        knee = j;
    }
    Some(knee)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    /// Relative ℓ∞ error, averaged over repeats.
    pub error: f64,
    /// Largest standard error relative to the reference scale, averaged
    /// over repeats.
    pub noise: f64,
    pub mean_steps: f64,
    pub truncations: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub target: String,
    pub reference: Reference,
    pub repeats: usize,
    pub sweep: Sweep,
    pub points: Vec<SweepPoint>,
    /// Fitted log-log slope of error against `N_s`.
    pub slope: Option<f64>,
    /// Index of the first plateau point of a cutoff sweep.
    pub knee: Option<usize>,
    pub warnings: Vec<String>,
}

impl ConvergenceTable {
    /// Errors are non-increasing up to the knee.
    pub fn knee_shape_holds(&self) -> bool {
        let Some(knee) = self.knee else { return false };
        self.points[..=knee].windows(2).all(|w| w[1].error <= w[0].error)
    }

    pub fn write_tsv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let name = match self.sweep {
            Sweep::Samples(_) => "samples",
            Sweep::Cutoff(_) => "cutoff",
        };
        writeln!(out, "{name}\trel_linf_error\tnoise\tmean_steps\ttruncations")?;
        for (i, p) in self.points.iter().enumerate() {
            let mark = if self.knee == Some(i) { "\tknee" } else { "" };
            writeln!(
                out,
                "{:e}\t{:.6e}\t{:.3e}\t{:.3}\t{}{mark}",
                p.value, p.error, p.noise, p.mean_steps, p.truncations
            )?;
        }
        if let Some(s) = self.slope {
            writeln!(out, "# slope\t{s:.4}")?;
        }
        Ok(())
    }
}

fn run_target(
    a: &SparseMatrix,
    func: &MatrixFunction,
    target: &Target,
    config: &WalkConfig,
    opts: &EstimatorOptions,
) -> Result<FunmResult> {
    match target {
        Target::Full => rand_funm(a, func, config, opts),
        Target::Diagonal => rand_funm_diag(a, func, config, opts),
        Target::Action(v) => rand_funm_action(a, func, v, config, opts),
    }
}

fn tracked(res: &FunmResult) -> Vec<f64> {
    match res.full() {
        Some(m) => m.as_slice().to_vec(),
        None => res.values(),
    }
}

fn oracle_values(a: &SparseMatrix, func: &MatrixFunction, target: &Target, terms: usize) -> Result<Vec<f64>> {
    if a.n() > MAX_DENSE_N {
        return Err(Error::invalid(format!(
            "no dense oracle for n = {} (limit {MAX_DENSE_N}); designate a high-budget reference run instead",
            a.n()
        )));
    }
    let m = dense_funm(a, func, terms)?.matrix;
    Ok(match target {
        Target::Full => m.as_slice().to_vec(),
        Target::Diagonal => m.diag(),
        Target::Action(v) => m.mul_vec(v),
    })
}

fn reference_values(
    a: &SparseMatrix,
    func: &MatrixFunction,
    target: &Target,
    reference: Reference,
    base: &WalkConfig,
    opts: &EstimatorOptions,
) -> Result<Vec<f64>> {
    match reference {
        Reference::Oracle { terms } => oracle_values(a, func, target, terms),
        Reference::Run { samples } => {
            let mut cfg = *base;
            cfg.samples = samples;
            cfg.seed = base.seed ^ REFERENCE_SEED_SALT;
            Ok(tracked(&run_target(a, func, target, &cfg, opts)?))
        }
    }
}

/// Error of the randomized estimator for `target` at each sweep value,
/// averaged over seeds `base.seed .. base.seed + repeats`.
#[allow(clippy::too_many_arguments)]
pub fn convergence_sweep(
    a: &SparseMatrix,
    func: &MatrixFunction,
    target: &Target,
    sweep: &Sweep,
    base: &WalkConfig,
    repeats: usize,
    reference: Reference,
    opts: &EstimatorOptions,
) -> Result<ConvergenceTable> {
    target.check(a.n())?;
    if sweep.len() == 0 {
        return Err(Error::invalid("empty sweep"));
    }
    if repeats == 0 {
        return Err(Error::invalid("repeats must be positive"));
    }
    let exact = reference_values(a, func, target, reference, base, opts)?;
    let scale = exact.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };

    let mut points = Vec::with_capacity(sweep.len());
    for i in 0..sweep.len() {
        let (value, cfg) = sweep.config(i, base);
        let mut point = SweepPoint {
            value,
            error: 0.0,
            noise: 0.0,
            mean_steps: 0.0,
            truncations: 0,
        };
        for r in 0..repeats {
            let mut cfg = cfg;
            cfg.seed = base.seed.wrapping_add(r as u64);
            let res = run_target(a, func, target, &cfg, opts)?;
            point.error += relative_linf_error(&tracked(&res), &exact);
            point.noise += res.max_std_error() / scale;
            point.mean_steps += res.stats.mean_steps();
            point.truncations += res.stats.truncations;
        }
        let r = repeats as f64;
        point.error /= r;
        point.noise /= r;
        point.mean_steps /= r;
        log::info!("{} = {value:e}: error {:.3e}", sweep_name(sweep), point.error);
        points.push(point);
    }

    let mut warnings = Vec::new();
    if points.len() < 2 {
        warnings.push("a single sweep point has no slope or knee".to_string());
    }
    let (slope, knee) = match sweep {
        Sweep::Samples(_) if points.len() >= 2 => {
            let xs: Vec<f64> = points.iter().map(|p| p.value).collect();
            let ys: Vec<f64> = points.iter().map(|p| p.error).collect();
            let slope = loglog_slope(&xs, &ys);
            if slope.is_none() {
                warnings.push("slope undefined: zero error or repeated sample counts".to_string());
            }
            (slope, None)
        }
        Sweep::Cutoff(_) if points.len() >= 2 => {
            let errors: Vec<f64> = points.iter().map(|p| p.error).collect();
            let noise: Vec<f64> = points.iter().map(|p| p.noise).collect();
            (None, detect_knee(&errors, &noise))
        }
        _ => (None, None),
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ConvergenceTable {
        target: target.name().to_string(),
        reference,
        repeats,
        sweep: sweep.clone(),
        points,
        slope,
        knee,
        warnings,
    })
}

fn sweep_name(sweep: &Sweep) -> &'static str {
    match sweep {
        Sweep::Samples(_) => "samples",
        Sweep::Cutoff(_) => "cutoff",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[serde(rename = "randfunm")]
    RandFunm,
    #[serde(rename = "randfunm-diag")]
    RandFunmDiag,
    #[serde(rename = "randfunm-action")]
    RandFunmAction,
    Mc,
    Cg,
    DenseOracle,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::RandFunm => "randfunm",
            Method::RandFunmDiag => "randfunm-diag",
            Method::RandFunmAction => "randfunm-action",
            Method::Mc => "mc",
            Method::Cg => "cg",
            Method::DenseOracle => "dense-oracle",
        }
    }

    pub fn supports(&self, target: &Target, func: &MatrixFunction) -> bool {
        match self {
            Method::RandFunm => matches!(target, Target::Full | Target::Diagonal),
            Method::RandFunmDiag => matches!(target, Target::Diagonal),
            Method::RandFunmAction => matches!(target, Target::Action(_)),
            Method::Mc | Method::DenseOracle => true,
            Method::Cg => matches!(target, Target::Action(_)) && *func == MatrixFunction::Resolvent,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "randfunm" => Ok(Method::RandFunm),
            "randfunm-diag" => Ok(Method::RandFunmDiag),
            "randfunm-action" => Ok(Method::RandFunmAction),
            "mc" => Ok(Method::Mc),
            "cg" => Ok(Method::Cg),
            "dense-oracle" | "oracle" => Ok(Method::DenseOracle),
            other => Err(Error::invalid(format!(
                "unknown method {other:?}; expected randfunm, randfunm-diag, randfunm-action, mc, cg or dense-oracle"
            ))),
        }
    }
}

/// One method's output on a [`Target`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: Method,
    /// Row-major matrix for [`Target::Full`], the tracked vector otherwise.
    pub values: Vec<f64>,
    pub elapsed_secs: f64,
    pub stats: Option<WalkStats>,
}

/// Tolerance and iteration cap used when CG is one of the compared methods.
pub const COMPARE_CG_TOL: f64 = 1e-12;
pub const COMPARE_CG_MAX_ITER: usize = 10_000;

/// Runs `method` on `a` (already scaled by `γ`).
pub fn run_method(
    a: &SparseMatrix,
    func: &MatrixFunction,
    target: &Target,
    method: Method,
    config: &WalkConfig,
    budget: McBudget,
    opts: &EstimatorOptions,
) -> Result<MethodRun> {
    target.check(a.n())?;
    if !method.supports(target, func) {
        return Err(Error::invalid(format!(
            "method {method} cannot compute the {} of the {func} function",
            target.name()
        )));
    }
    let start = Instant::now();
    let (values, stats) = match method {
        Method::RandFunm => {
            let res = rand_funm(a, func, config, opts)?;
            let values = match target {
                Target::Diagonal => res.values(),
                _ => tracked(&res),
            };
            (values, Some(res.stats))
        }
        Method::RandFunmDiag | Method::RandFunmAction => {
            let res = run_target(a, func, target, config, opts)?;
            (res.values(), Some(res.stats))
        }
        Method::Mc => {
            let mode = match target {
                Target::Full => McMode::Full,
                Target::Diagonal => McMode::Diag,
                Target::Action(v) => McMode::Action(v.clone()),
            };
            let res = mc_baseline(a, func, config, &mode, budget, opts)?;
            (tracked(&res), Some(res.stats))
        }
        Method::Cg => {
            let Target::Action(v) = target else { unreachable!() };
            (cg_solve(a, 1.0, v, COMPARE_CG_TOL, COMPARE_CG_MAX_ITER)?.x, None)
        }
        Method::DenseOracle => (oracle_values(a, func, target, DEFAULT_EXP_TERMS)?, None),
    };
    Ok(MethodRun {
        method,
        values,
        elapsed_secs: start.elapsed().as_secs_f64(),
        stats,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareRow {
    pub method: Method,
    /// Relative ℓ∞ error against the reference.
    pub error: f64,
    /// Pearson correlation with the reference on its top entries.
    pub cc: Option<f64>,
    pub elapsed_secs: f64,
    pub stats: Option<WalkStats>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub target: String,
    pub reference: Method,
    pub top_fraction: f64,
    pub rows: Vec<CompareRow>,
    /// Relative ℓ∞ gap of the second method against the first.
    pub gap: f64,
}

impl ComparisonTable {
    pub fn write_tsv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "method\trel_linf_error\tcc_top\telapsed_s\twalks\tmean_steps")?;
        for r in &self.rows {
            let cc = r.cc.map_or("-".to_string(), |c| format!("{c:.6}"));
            let (walks, steps) = r.stats.map_or(("-".to_string(), "-".to_string()), |s| {
                (s.walks.to_string(), format!("{:.3}", s.mean_steps()))
            });
            writeln!(
                out,
                "{}\t{:.6e}\t{cc}\t{:.3}\t{walks}\t{steps}",
                r.method, r.error, r.elapsed_secs
            )?;
        }
        writeln!(out, "# reference\t{}", self.reference)?;
        writeln!(out, "# gap\t{:.6e}", self.gap)
    }
}

/// The default reference: the dense oracle when it fits, CG for resolvent
/// actions, `None` otherwise.
pub fn default_reference(a: &SparseMatrix, func: &MatrixFunction, target: &Target) -> Option<Method> {
    if a.n() <= MAX_DENSE_N {
        Some(Method::DenseOracle)
    } else if Method::Cg.supports(target, func) {
        Some(Method::Cg)
    } else {
        None
    }
}

/// Runs two methods on the same instance and seed and scores both against
/// `reference`, or against the first method when no reference is given.
#[allow(clippy::too_many_arguments)]
pub fn compare_methods(
    a: &SparseMatrix,
    func: &MatrixFunction,
    target: &Target,
    methods: [Method; 2],
    reference: Option<Method>,
    config: &WalkConfig,
    budget: McBudget,
    top_fraction: f64,
    opts: &EstimatorOptions,
) -> Result<ComparisonTable> {
    for m in methods.iter().chain(reference.as_ref()) {
        if !m.supports(target, func) {
            return Err(Error::invalid(format!(
                "method {m} cannot compute the {} of the {func} function",
                target.name()
            )));
        }
    }
    let runs = [
        run_method(a, func, target, methods[0], config, budget, opts)?,
        run_method(a, func, target, methods[1], config, budget, opts)?,
    ];
    let reference_run = match reference {
        Some(m) if m == methods[0] => runs[0].clone(),
        Some(m) if m == methods[1] => runs[1].clone(),
        Some(m) => run_method(a, func, target, m, config, budget, opts)?,
        None => runs[0].clone(),
    };
    let ranked = |values: &[f64]| -> Vec<f64> {
        match target {
            Target::Full => {
                let n = a.n();
                (0..n).map(|i| values[i * n + i]).collect()
            }
            _ => values.to_vec(),
        }
    };
    let ref_ranked = ranked(&reference_run.values);
    let rows = runs
        .iter()
        .map(|run| CompareRow {
            method: run.method,
            error: relative_linf_error(&run.values, &reference_run.values),
            cc: top_correlation(&ref_ranked, &ranked(&run.values), top_fraction).ok(),
            elapsed_secs: run.elapsed_secs,
            stats: run.stats,
        })
        .collect();
    Ok(ComparisonTable {
        target: target.name().to_string(),
        reference: reference_run.method,
        top_fraction,
        rows,
        gap: relative_linf_error(&runs[1].values, &runs[0].values),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs = [1e3, 1e4, 1e5, 1e6];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(loglog_slope(&[10.0], &[1.0]), None);
        assert_eq!(loglog_slope(&[10.0, 100.0], &[1.0, 0.0]), None);
    }

    #[test]
    fn knee_is_start_of_plateau() {
        let errors = [1.0, 0.1, 0.011, 0.0101, 0.0102];
        let noise = [0.001; 5];
        assert_eq!(detect_knee(&errors, &noise), Some(2));
        assert_eq!(detect_knee(&[0.5], &[0.0]), Some(0));
        assert_eq!(detect_knee(&[], &[]), None);
    }

    #[test]
    fn relative_error_scales_by_reference() {
        assert_eq!(relative_linf_error(&[1.0, 2.5], &[1.0, 2.0]), 0.25);
        assert_eq!(relative_linf_error(&[0.5], &[0.0]), 0.5);
    }

    #[test]
    fn method_names_round_trip() {
        for m in [
            Method::RandFunm,
            Method::RandFunmDiag,
            Method::RandFunmAction,
            Method::Mc,
            Method::Cg,
            Method::DenseOracle,
        ] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("lanczos".parse::<Method>().is_err());
    }
}
