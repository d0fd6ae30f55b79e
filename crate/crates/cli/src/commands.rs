use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use randfunm::centrality::{
    katz_centrality, katz_centrality_with_gamma, ranking_correlation, subgraph_centrality, total_communicability,
    CentralityReport, KatzMethod, DEFAULT_SC_GAMMA, DEFAULT_TC_GAMMA,
};
use randfunm::experiment::{
    compare_methods, convergence_sweep, default_reference, relative_linf_error, Method, Reference, Sweep, Target,
};
use randfunm::sparsemat::write_edge_list;
use randfunm::{Accumulation, EstimatorOptions, MatrixFunction, McBudget, WalkConfig, VERSION};

use crate::args::*;
use crate::input::{self, Instance};
use crate::UsageError;

const DEFAULT_KATZ_FRACTION: f64 = 0.85;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Everything a run depends on, echoed into each JSON artifact.
#[derive(Serialize)]
struct RunConfig<'a, A: Serialize> {
    command: &'static str,
    #[serde(flatten)]
    args: &'a A,
    /// Worker threads actually used.
    threads_resolved: usize,
}

fn run_config<A: Serialize>(command: &'static str, args: &A, threads: usize) -> Value {
    serde_json::to_value(RunConfig {
        command,
        args,
        threads_resolved: threads,
    })
    .expect("run configuration serialises")
}

fn walk_setup(w: &WalkArgs) -> Result<(WalkConfig, EstimatorOptions)> {
    let accumulation = match w.mode {
        ModeArg::Deterministic => Accumulation::Deterministic,
        ModeArg::Fast => Accumulation::Fast,
    };
    let threads = match w.threads {
        Some(0) | None if w.mode == ModeArg::Fast => std::thread::available_parallelism().map_or(1, |n| n.get()),
        Some(0) | None => 1,
        Some(t) => t as usize,
    };
    let max_steps = usize::try_from(w.max_steps).map_err(|_| usage("--max-steps too large"))?;
    let block = usize::try_from(w.block_size).map_err(|_| usage("--block-size too large"))?;
    let config = WalkConfig::new(w.samples, w.cutoff, w.seed).with_max_steps(max_steps);
    config.validate()?;
    let opts = EstimatorOptions::default()
        .with_accumulation(accumulation)
        .with_threads(threads)
        .with_block_size(block);
    Ok((config, opts))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// `--report`, or the data output with a `.json` extension.
fn report_path(report: &Option<PathBuf>, output: &Option<PathBuf>) -> Option<PathBuf> {
    report
        .clone()
        .or_else(|| output.as_ref().map(|p| p.with_extension("json")))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{suffix}"),
    };
    path.with_file_name(name)
}

fn summary(inst: &Instance, report: &CentralityReport, elapsed: f64) {
    let (walks, mean_steps, truncations) = report
        .stats
        .map_or((0, 0.0, 0), |s| (s.walks, s.mean_steps(), s.truncations));
    log::info!(
        "{} ({}): n = {}, nnz = {}, walks = {walks}, mean steps = {mean_steps:.3}, truncations = {truncations}, elapsed = {elapsed:.3}s",
        serde_json::to_value(report.measure).unwrap_or_default().as_str().unwrap_or(""),
        report.method,
        inst.matrix.n(),
        inst.matrix.nnz(),
    );
}

fn finish(inst: &Instance, report: CentralityReport) -> Result<CentralityReport> {
    Ok(report.with_node_ids(inst.node_ids.clone())?.with_split(inst.split))
}

pub fn compute(args: &ComputeArgs) -> Result<()> {
    let (config, opts) = walk_setup(&args.walk)?;
    if args.measure != MeasureArg::Katz && args.fraction.is_some() {
        return Err(usage("--fraction only applies to katz; use --gamma"));
    }
    if args.measure != MeasureArg::Katz && args.method != KatzMethodArg::Randomized {
        return Err(usage("--method only applies to katz"));
    }
    if args.method == KatzMethodArg::Both && args.output.is_none() {
        return Err(usage("--method both writes two score files; pass --output"));
    }
    let inst = input::load(&args.input)?;
    let run = run_config("compute", args, opts.threads);
    let max_iter = usize::try_from(args.cg_max_iter).map_err(|_| usage("--cg-max-iter too large"))?;
    let cg = KatzMethod::Cg {
        tol: args.cg_tol,
        max_iter,
    };
    let katz = |method: KatzMethod| -> Result<CentralityReport> {
        let start = Instant::now();
        let r = match args.gamma {
            Some(g) => katz_centrality_with_gamma(&inst.matrix, g, &config, &opts, method)?,
            None => katz_centrality(
                &inst.matrix,
                args.fraction.unwrap_or(DEFAULT_KATZ_FRACTION),
                &config,
                &opts,
                method,
            )?,
        };
        summary(&inst, &r, start.elapsed().as_secs_f64());
        finish(&inst, r)
    };

    let reports = match (args.measure, args.method) {
        (MeasureArg::Katz, KatzMethodArg::Both) => vec![katz(KatzMethod::Randomized)?, katz(cg)?],
        (MeasureArg::Katz, KatzMethodArg::Cg) => vec![katz(cg)?],
        (MeasureArg::Katz, KatzMethodArg::Randomized) => vec![katz(KatzMethod::Randomized)?],
        (measure, _) => {
            let start = Instant::now();
            let r = if measure == MeasureArg::Subgraph {
                subgraph_centrality(&inst.matrix, args.gamma.unwrap_or(DEFAULT_SC_GAMMA), &config, &opts)?
            } else {
                total_communicability(&inst.matrix, args.gamma.unwrap_or(DEFAULT_TC_GAMMA), &config, &opts)?
            };
            summary(&inst, &r, start.elapsed().as_secs_f64());
            vec![finish(&inst, r)?]
        }
    };

    if let [rand, cg] = reports.as_slice() {
        let out = args.output.as_ref().expect("checked above");
        let gap = relative_linf_error(&rand.scores, &cg.scores);
        let cc = ranking_correlation(cg, rand, 0.01).ok();
        log::info!("randomized vs cg: relative l-inf gap {gap:.3e}, top-1% cc {cc:?}");
        for r in &reports {
            let path = with_suffix(out, &r.method);
            r.write_csv_file(&path)?;
            log::info!("wrote {}", path.display());
        }
        let json = json!({
            "version": VERSION,
            "config": run,
            "reports": [rand, cg],
            "gap": gap,
            "cc_top_1pct": cc,
        });
        write_json(&report_path(&args.report, &args.output).expect("output set"), &json)?;
        println!("gap\t{gap:.6e}");
        return Ok(());
    }

    let report = &reports[0];
    match &args.output {
        Some(path) => {
            report.write_csv_file(path)?;
            log::info!("wrote {}", path.display());
        }
        None => report.write_csv(io::stdout().lock())?,
    }
    if let Some(path) = report_path(&args.report, &args.output) {
        write_json(&path, &report.to_json(&run))?;
    }
    Ok(())
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let g = input::parse_generator(&args.spec)?;
    let inst = input::generate(&g)?;
    write_edge_list(&args.output, &inst.matrix, &inst.node_ids, true)?;
    log::info!(
        "wrote {}: n = {}, edges = {}",
        args.output.display(),
        inst.matrix.n(),
        inst.matrix.nnz() / 2
    );
    Ok(())
}

fn problem(p: &ProblemArgs) -> Result<(Instance, randfunm::SparseMatrix, MatrixFunction, Target)> {
    let inst = input::load(&p.input)?;
    let scaled = inst.matrix.scale(p.gamma)?;
    let func = match p.function {
        FunctionArg::Exp => MatrixFunction::Exponential,
        FunctionArg::Resolvent => MatrixFunction::Resolvent,
    };
    let target = match p.target {
        TargetArg::Full => Target::Full,
        TargetArg::Diagonal => Target::Diagonal,
        TargetArg::Action => Target::Action(vec![1.0; inst.matrix.n()]),
    };
    Ok((inst, scaled, func, target))
}

fn table_out(output: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match output {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn convergence(args: &ConvergenceArgs) -> Result<()> {
    let (config, opts) = walk_setup(&args.walk)?;
    let sweep = if args.sweep_cutoff.is_empty() {
        Sweep::Samples(args.sweep_samples.clone())
    } else {
        Sweep::Cutoff(args.sweep_cutoff.clone())
    };
    let (_, a, func, target) = problem(&args.problem)?;
    let reference = match args.reference_samples {
        Some(samples) => Reference::Run { samples },
        None => Reference::default(),
    };
    let repeats = usize::try_from(args.repeats).map_err(|_| usage("--repeats too large"))?;
    let table = convergence_sweep(&a, &func, &target, &sweep, &config, repeats, reference, &opts)?;
    let mut out = table_out(&args.output)?;
    table.write_tsv(&mut out)?;
    out.flush()?;
    drop(out);
    if let Some(s) = table.slope {
        log::info!("fitted log-log slope {s:.4}");
    }
    if let Some(path) = report_path(&args.report, &args.output) {
        let run = run_config("convergence", args, opts.threads);
        write_json(&path, &json!({ "version": VERSION, "config": run, "table": table }))?;
    }
    Ok(())
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    let (config, opts) = walk_setup(&args.walk)?;
    let methods: Vec<Method> = args.methods.iter().map(|m| m.parse()).collect::<Result<_, _>>()?;
    let [first, second] = methods[..] else {
        return Err(usage(format!(
            "--methods needs exactly two methods, got {}",
            methods.len()
        )));
    };
    let (_, a, func, target) = problem(&args.problem)?;
    let reference = match &args.reference {
        Some(r) => Some(r.parse::<Method>()?),
        None => default_reference(&a, &func, &target),
    };
    let budget = match args.budget {
        BudgetArg::PerRow => McBudget::PerRow,
        BudgetArg::Global => McBudget::Global,
    };
    let table = compare_methods(
        &a,
        &func,
        &target,
        [first, second],
        reference,
        &config,
        budget,
        args.top_fraction,
        &opts,
    )?;
    let mut out = table_out(&args.output)?;
    table.write_tsv(&mut out)?;
    out.flush()?;
    drop(out);
    if let Some(path) = report_path(&args.report, &args.output) {
        let run = run_config("compare", args, opts.threads);
        write_json(&path, &json!({ "version": VERSION, "config": run, "table": table }))?;
    }
    Ok(())
}
