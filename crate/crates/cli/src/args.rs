use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "randfunm",
    version,
    about = "Monte Carlo matrix functions and network centrality"
)]
pub struct Cli {
    /// Only print warnings and errors on stderr.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a centrality measure and write scores as CSV.
    Compute(ComputeArgs),
    /// Write a synthetic graph as an edge list.
    Generate(GenerateArgs),
    /// Error against an exact reference over a sweep of N_s or W_c.
    Convergence(ConvergenceArgs),
    /// Run two methods on the same instance and seed.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureArg {
    Subgraph,
    TotalComm,
    Katz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KatzMethodArg {
    Randomized,
    Cg,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Deterministic,
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionArg {
    Exp,
    Resolvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetArg {
    Full,
    Diagonal,
    Action,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetArg {
    PerRow,
    Global,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Edge list or Matrix Market (.mtx) file.
    #[arg(short, long, conflicts_with = "generate")]
    pub input: Option<PathBuf>,

    /// Generator and parameters, e.g. `smallworld n=1024 k=10 p=0.1 seed=1`
    /// or `kronecker scale=12 edge_factor=16 seed=1`.
    #[arg(short, long, num_args = 1.., value_name = "KIND [KEY=VALUE]...")]
    pub generate: Option<Vec<String>>,

    /// Treat the input as directed.
    #[arg(long)]
    pub directed: bool,

    /// Replace a directed graph by the symmetric block matrix [[0, A], [Aᵀ, 0]].
    #[arg(long)]
    pub symmetrize: bool,

    /// Keep self-loops.
    #[arg(long)]
    pub keep_loops: bool,

    /// Sum repeated edges instead of dropping them.
    #[arg(long)]
    pub keep_duplicates: bool,

    /// Keep nodes without edges.
    #[arg(long)]
    pub keep_isolated: bool,

    /// Use numeric edge values instead of 1.
    #[arg(long)]
    pub weighted: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WalkArgs {
    /// Total number of random walks N_s.
    #[arg(short = 'n', long, default_value = "1e6", value_parser = parse_count)]
    pub samples: u64,

    /// Relative weight cutoff W_c.
    #[arg(short, long, default_value = "1e-6", value_parser = parse_real)]
    pub cutoff: f64,

    /// Step cap per walk.
    #[arg(long, default_value = "1e4", value_parser = parse_count)]
    pub max_steps: u64,

    #[arg(short, long, default_value = "0", value_parser = parse_count)]
    pub seed: u64,

    /// Worker threads [default: 1 when deterministic, all cores when fast].
    #[arg(short = 'j', long, value_parser = parse_count)]
    pub threads: Option<u64>,

    #[arg(long, value_enum, default_value = "deterministic")]
    pub mode: ModeArg,

    /// Rows of Q kept live at once by the full-matrix estimator.
    #[arg(long, default_value = "1024", value_parser = parse_count)]
    pub block_size: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ComputeArgs {
    #[arg(value_enum)]
    pub measure: MeasureArg,

    #[command(flatten)]
    pub input: InputArgs,

    /// Attenuation γ [default: 1e-3 for subgraph, 1e-5 for total-comm].
    #[arg(long, value_parser = parse_real, conflicts_with = "fraction")]
    pub gamma: Option<f64>,

    /// Katz: γ as this fraction of 1/‖A‖∞.
    #[arg(long, value_parser = parse_real)]
    pub fraction: Option<f64>,

    /// Katz solver.
    #[arg(long, value_enum, default_value = "randomized")]
    pub method: KatzMethodArg,

    /// CG relative residual tolerance.
    #[arg(long, default_value = "1e-10", value_parser = parse_real)]
    pub cg_tol: f64,

    #[arg(long, default_value = "1e4", value_parser = parse_count)]
    pub cg_max_iter: u64,

    #[command(flatten)]
    pub walk: WalkArgs,

    /// CSV output [default: stdout].  With `--method both` the two score
    /// files get `.randomized` and `.cg` inserted before the extension.
    #[arg(short, long)]
    pub output: Option<PathBuf>,

    /// JSON report [default: next to the CSV with a .json extension].
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    /// Generator and parameters, as for `compute --generate`.
    #[arg(required = true, num_args = 1.., value_name = "KIND [KEY=VALUE]...")]
    pub spec: Vec<String>,

    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProblemArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[arg(long, value_enum, default_value = "exp")]
    pub function: FunctionArg,

    /// Scale applied to the adjacency matrix before evaluating f.
    #[arg(long, default_value = "1e-3", value_parser = parse_real)]
    pub gamma: f64,

    /// Output to measure; `action` applies f(γA) to the all-ones vector.
    #[arg(long, value_enum, default_value = "diagonal")]
    pub target: TargetArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,

    /// Comma-separated N_s values.
    #[arg(long, value_delimiter = ',', value_parser = parse_count, required_unless_present = "sweep_cutoff", conflicts_with = "sweep_cutoff")]
    pub sweep_samples: Vec<u64>,

    /// Comma-separated W_c values, coarse to fine.
    #[arg(long, value_delimiter = ',', value_parser = parse_real)]
    pub sweep_cutoff: Vec<f64>,

    /// Seeds averaged per sweep point.
    #[arg(long, default_value = "1", value_parser = parse_count)]
    pub repeats: u64,

    /// Use a run with this many walks as the reference instead of the dense oracle.
    #[arg(long, value_parser = parse_count)]
    pub reference_samples: Option<u64>,

    #[command(flatten)]
    pub walk: WalkArgs,

    /// Table output (tab separated) [default: stdout].
    #[arg(short, long)]
    pub output: Option<PathBuf>,

    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,

    /// Two of randfunm, randfunm-diag, randfunm-action, mc, cg, dense-oracle.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub methods: Vec<String>,

    /// Method the errors are measured against [default: dense-oracle when it
    /// fits, else cg for resolvent actions, else the first method].
    #[arg(long)]
    pub reference: Option<String>,

    /// How `--samples` is read by the mc method.
    #[arg(long, value_enum, default_value = "global")]
    pub budget: BudgetArg,

    /// Fraction of top-ranked entries used for the correlation.
    #[arg(long, default_value = "0.01", value_parser = parse_real)]
    pub top_fraction: f64,

    #[command(flatten)]
    pub walk: WalkArgs,

    #[arg(short, long)]
    pub output: Option<PathBuf>,

    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Non-negative integer, also written in scientific notation (`1e6`).
pub fn parse_count(s: &str) -> Result<u64, String> {
    let s = s.trim().replace('_', "");
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v < 0.0 || v.is_nan() || v.fract() != 0.0 || v > 9.007_199_254_740_992e15 {
        return Err(format!("{s:?} is not a non-negative integer"));
    }
    Ok(v as u64)
}

pub fn parse_real(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("{s:?} is not a number"))?;
    if !v.is_finite() {
        return Err(format!("{s:?} is not finite"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_accept_scientific_notation() {
        assert_eq!(parse_count("1e8"), Ok(100_000_000));
        assert_eq!(parse_count("2.5e3"), Ok(2500));
        assert_eq!(parse_count("1_000"), Ok(1000));
        assert_eq!(parse_count("18446744073709551615"), Ok(u64::MAX));
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-1").is_err());
        assert!(parse_count("many").is_err());
    }

    #[test]
    fn reals_reject_non_finite() {
        assert_eq!(parse_real("1e-3"), Ok(1e-3));
        assert!(parse_real("inf").is_err());
        assert!(parse_real("NaN").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
