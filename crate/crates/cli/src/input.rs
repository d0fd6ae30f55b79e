use std::collections::BTreeMap;

use anyhow::{Context, Result};
use randfunm::graphgen::{gen_kronecker, gen_smallworld, KroneckerParams, SmallWorldParams};
use randfunm::sparsemat::{load_graph, GraphOptions, GraphSource};
use randfunm::SparseMatrix;

use crate::args::{parse_count, parse_real, InputArgs};
use crate::UsageError;

/// A graph ready for the estimators.
pub struct Instance {
    pub matrix: SparseMatrix,
    pub node_ids: Vec<u64>,
    /// Number of out-edge copies when the matrix is a symmetrised digraph.
    pub split: Option<usize>,
}

pub enum Generator {
    SmallWorld(SmallWorldParams),
    Kronecker(KroneckerParams),
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Parses `KIND key=value ...`.
pub fn parse_generator(spec: &[String]) -> Result<Generator> {
    let (kind, rest) = spec.split_first().ok_or_else(|| usage("empty generator spec"))?;
    let mut params = BTreeMap::new();
    for kv in rest {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| usage(format!("generator parameter {kv:?} is not KEY=VALUE")))?;
        params.insert(k.to_ascii_lowercase(), v.to_string());
    }
    let mut take = |keys: &[&str]| -> Option<String> { keys.iter().find_map(|k| params.remove(*k)) };
    let count =
        |v: Option<String>, default: u64| -> Result<u64> { v.map_or(Ok(default), |s| parse_count(&s).map_err(usage)) };
    let real =
        |v: Option<String>, default: f64| -> Result<f64> { v.map_or(Ok(default), |s| parse_real(&s).map_err(usage)) };

    let generator = match kind.to_ascii_lowercase().as_str() {
        "smallworld" | "small-world" | "ws" => Generator::SmallWorld(SmallWorldParams {
            n: count(take(&["n"]), 1024)? as usize,
            k: count(take(&["k"]), 10)? as usize,
            rewire_prob: real(take(&["p", "rewire_prob"]), 0.1)?,
            seed: count(take(&["seed"]), 0)?,
        }),
        "kronecker" | "rmat" => {
            let scale = count(take(&["scale"]), 10)?;
            let edge_factor = count(take(&["edge_factor", "ef"]), 16)? as usize;
            let seed = count(take(&["seed"]), 0)?;
            let mut p = KroneckerParams::graph500(
                u32::try_from(scale).map_err(|_| usage("scale too large"))?,
                edge_factor,
                seed,
            );
            p.pa = real(take(&["a", "pa"]), p.pa)?;
            p.pb = real(take(&["b", "pb"]), p.pb)?;
            p.pc = real(take(&["c", "pc"]), p.pc)?;
            Generator::Kronecker(p)
        }
        other => {
            return Err(usage(format!(
                "unknown generator {other:?}; expected smallworld or kronecker"
            )))
        }
    };
    if let Some(k) = params.keys().next() {
        return Err(usage(format!("unknown parameter {k:?} for generator {kind}")));
    }
    Ok(generator)
}

pub fn generate(g: &Generator) -> Result<Instance> {
    let out = match g {
        Generator::SmallWorld(p) => gen_smallworld(p)?,
        Generator::Kronecker(p) => gen_kronecker(p)?,
    };
    Ok(Instance {
        matrix: out.matrix,
        node_ids: out.node_ids,
        split: None,
    })
}

pub fn load(args: &InputArgs) -> Result<Instance> {
    let mut inst = match (&args.input, &args.generate) {
        (Some(path), None) => {
            let options = GraphOptions {
                directed: args.directed || args.symmetrize,
                drop_loops: !args.keep_loops,
                drop_duplicates: !args.keep_duplicates,
                drop_isolated: !args.keep_isolated,
                keep_weights: args.weighted,
            };
            log::info!("loading {}", path.display());
            let g = load_graph(&GraphSource::new(path, options))
                .with_context(|| format!("cannot load graph {}", path.display()))?;
            Instance {
                matrix: g.matrix,
                node_ids: g.node_ids,
                split: None,
            }
        }
        (None, Some(spec)) => {
            log::info!("generating {}", spec.join(" "));
            generate(&parse_generator(spec)?)?
        }
        _ => return Err(usage("pass exactly one of --input or --generate")),
    };
    if args.symmetrize {
        let n = inst.matrix.n();
        // Second-half nodes are the in-edge copies; give them ids past the
        // largest original id.
        let offset = inst.node_ids.iter().max().map_or(0, |m| m + 1);
        inst.matrix = inst.matrix.symmetrize_digraph();
        let copies: Vec<u64> = inst.node_ids.iter().map(|id| id + offset).collect();
        inst.node_ids.extend(copies);
        inst.split = Some(n);
    }
    log::info!("graph: n = {}, nnz = {}", inst.matrix.n(), inst.matrix.nnz());
    Ok(inst)
}
