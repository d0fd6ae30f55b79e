//! Centrality measures on top of the estimators.
//!
//! * subgraph centrality: `(e^{γA})_ii`
//! * total communicability: `(e^{γA} 1)_i`
//! * Katz: `x` solving `(I - γA) x = 1`
//! * Estrada index: the trace of `e^{γA}`

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{rand_funm_action, rand_funm_diag, EstimatorOptions, WalkStats};
use crate::oracle::{cg_solve, gershgorin_gamma};
use crate::series::MatrixFunction;
use crate::sparsemat::SparseMatrix;
use crate::walker::{alpha_diagnostic, WalkConfig};

/// Default `γ` for subgraph centrality.
pub const DEFAULT_SC_GAMMA: f64 = 1e-3;
/// Default `γ` for total communicability.
pub const DEFAULT_TC_GAMMA: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    Subgraph,
    TotalCommunicability,
    Katz,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KatzMethod {
    Randomized,
    Cg { tol: f64, max_iter: usize },
}

impl KatzMethod {
    pub fn cg() -> Self {
        KatzMethod::Cg {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CentralityReport {
    pub measure: Measure,
    /// Estimator that produced the scores (`randomized`, `cg`, ...).
    pub method: String,
    pub gamma: f64,
    /// Source id of each internal node.
    pub node_ids: Vec<u64>,
    pub scores: Vec<f64>,
    /// Internal indices by descending score, ties by ascending index.
    pub ranking: Vec<usize>,
    pub std_error: Option<Vec<f64>>,
    pub stats: Option<WalkStats>,
    /// Set when the graph is a symmetrised digraph: nodes below this index
    /// are out-edge copies, the rest in-edge copies.
    pub split: Option<usize>,
}

/// Indices sorted by descending score, ties broken by ascending index.
pub fn rank_by_score(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

impl CentralityReport {
    fn new(measure: Measure, method: &str, gamma: f64, scores: Vec<f64>) -> Self {
        CentralityReport {
            measure,
            method: method.to_string(),
            gamma,
            node_ids: (0..scores.len() as u64).collect(),
            ranking: rank_by_score(&scores),
            scores,
            std_error: None,
            stats: None,
            split: None,
        }
    }

    pub fn n(&self) -> usize {
        self.scores.len()
    }

    /// Relabels nodes with their source ids.
    pub fn with_node_ids(mut self, ids: Vec<u64>) -> Result<Self> {
        if ids.len() != self.scores.len() {
            return Err(Error::invalid(format!(
                "{} node ids for {} scores",
                ids.len(),
                self.scores.len()
            )));
        }
        self.node_ids = ids;
        Ok(self)
    }

    pub fn with_split(mut self, split: Option<usize>) -> Self {
        self.split = split;
        self
    }

    /// 1-based rank of every node.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.n()];
        for (pos, &node) in self.ranking.iter().enumerate() {
            ranks[node] = pos + 1;
        }
        ranks
    }

    /// `node_id,score,rank` per node, in internal node order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let ranks = self.ranks();
        let io = |e: csv::Error| Error::Resource(format!("failed to write CSV: {e}"));
        w.write_record(["node_id", "score", "rank"]).map_err(io)?;
        for ((id, score), rank) in self.node_ids.iter().zip(&self.scores).zip(&ranks) {
            w.write_record([id.to_string(), format!("{score:.17e}"), rank.to_string()])
                .map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::Resource(format!("failed to write CSV: {e}")))
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.write_csv(BufWriter::new(file))
    }

    /// Full report with the run configuration and library version embedded.
    pub fn to_json(&self, run_config: &serde_json::Value) -> serde_json::Value {
        serde_json::json!({
            "version": crate::VERSION,
            "config": run_config,
            "report": self,
        })
    }
}

fn require_symmetric(a: &SparseMatrix) -> Result<()> {
    if a.is_empty() {
        return Err(Error::degenerate("graph has no edges"));
    }
    if !a.is_symmetric() {
        return Err(Error::invalid(
            "centrality needs a symmetric matrix; split directed graphs into the [[0, A], [Aᵀ, 0]] block form first",
        ));
    }
    Ok(())
}

/// `(e^{γA})_ii` via the diagonal estimator.
pub fn subgraph_centrality(
    a: &SparseMatrix,
    gamma: f64,
    config: &WalkConfig,
    opts: &EstimatorOptions,
) -> Result<CentralityReport> {
    require_symmetric(a)?;
    let scaled = a.scale(gamma)?;
    let res = rand_funm_diag(&scaled, &MatrixFunction::Exponential, config, opts)?;
    let mut report = CentralityReport::new(Measure::Subgraph, "randomized", gamma, res.values());
    report.std_error = res.std_error;
    report.stats = Some(res.stats);
    Ok(report)
}

/// `(e^{γA} 1)_i` via the action estimator.
pub fn total_communicability(
    a: &SparseMatrix,
    gamma: f64,
    config: &WalkConfig,
    opts: &EstimatorOptions,
) -> Result<CentralityReport> {
    require_symmetric(a)?;
    let scaled = a.scale(gamma)?;
    let ones = vec![1.0; a.n()];
    let res = rand_funm_action(&scaled, &MatrixFunction::Exponential, &ones, config, opts)?;
    let mut report = CentralityReport::new(Measure::TotalCommunicability, "randomized", gamma, res.values());
    report.std_error = res.std_error;
    report.stats = Some(res.stats);
    Ok(report)
}

/// Katz centrality with `γ = fraction / ‖A‖∞`.
pub fn katz_centrality(
    a: &SparseMatrix,
    fraction: f64,
    config: &WalkConfig,
    opts: &EstimatorOptions,
    method: KatzMethod,
) -> Result<CentralityReport> {
    require_symmetric(a)?;
    let gamma = gershgorin_gamma(a, fraction)?;
    katz_centrality_with_gamma(a, gamma, config, opts, method)
}

/// Katz centrality for an explicit attenuation `γ`.
pub fn katz_centrality_with_gamma(
    a: &SparseMatrix,
    gamma: f64,
    config: &WalkConfig,
    opts: &EstimatorOptions,
    method: KatzMethod,
) -> Result<CentralityReport> {
    require_symmetric(a)?;
    let ones = vec![1.0; a.n()];
    match method {
        KatzMethod::Randomized => {
            let scaled = a.scale(gamma)?;
            let alpha = alpha_diagnostic(&scaled);
            if alpha >= 1.0 {
                return Err(Error::invalid(format!(
                    "resolvent walks need max_i (Σ_j |γ a_ij|)² < 1, got {alpha:.4}; lower γ"
                )));
            }
            let res = rand_funm_action(&scaled, &MatrixFunction::Resolvent, &ones, config, opts)?;
            let mut report = CentralityReport::new(Measure::Katz, "randomized", gamma, res.values());
            report.std_error = res.std_error;
            report.stats = Some(res.stats);
            Ok(report)
        }
        KatzMethod::Cg { tol, max_iter } => {
            let sol = cg_solve(a, gamma, &ones, tol, max_iter)?;
            Ok(CentralityReport::new(Measure::Katz, "cg", gamma, sol.x))
        }
    }
}

/// Sum of subgraph centralities, i.e. the trace of `e^{γA}`.
pub fn estrada_index(report: &CentralityReport) -> Result<f64> {
    if report.measure != Measure::Subgraph {
        return Err(Error::invalid("the Estrada index is defined on subgraph centrality"));
    }
    Ok(report.scores.iter().sum())
}

/// Pearson correlation between two score vectors, restricted to the top
/// `⌈top_fraction · n⌉` nodes of the reference ranking.
pub fn ranking_correlation(reference: &CentralityReport, test: &CentralityReport, top_fraction: f64) -> Result<f64> {
    if reference.n() != test.n() || reference.node_ids != test.node_ids {
        return Err(Error::invalid("reports cover different node sets"));
    }
    top_correlation(&reference.scores, &test.scores, top_fraction)
}

/// Pearson correlation on the top `⌈top_fraction · n⌉` entries of `reference`
/// (ranked by descending value, ties by ascending index).
pub fn top_correlation(reference: &[f64], test: &[f64], top_fraction: f64) -> Result<f64> {
    if reference.len() != test.len() {
        return Err(Error::invalid(format!(
            "{} reference scores vs {} test scores",
            reference.len(),
            test.len()
        )));
    }
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "top fraction must lie in (0, 1], got {top_fraction}"
        )));
    }
    let n = reference.len();
    let k = ((top_fraction * n as f64).ceil() as usize).min(n);
    if k < 2 {
        return Err(Error::invalid(format!(
            "correlation needs at least 2 nodes, top set has {k}"
        )));
    }
    let top = &rank_by_score(reference)[..k];
    let xs: Vec<f64> = top.iter().map(|&i| reference[i]).collect();
    let ys: Vec<f64> = top.iter().map(|&i| test[i]).collect();
    pearson(&xs, &ys)
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid("correlation undefined for constant scores"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
