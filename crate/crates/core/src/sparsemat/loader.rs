use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SparseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphFormat {
    EdgeList,
    MatrixMarket,
}

impl GraphFormat {
    /// `.mtx` selects Matrix Market, anything else is read as an edge list.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("mtx") => GraphFormat::MatrixMarket,
            _ => GraphFormat::EdgeList,
        }
    }
}

/// Filters applied while ingesting a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphOptions {
    pub directed: bool,
    pub drop_loops: bool,
    pub drop_duplicates: bool,
    pub drop_isolated: bool,
    /// Keep numeric edge values instead of forcing every entry to 1.
    pub keep_weights: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            directed: false,
            drop_loops: true,
            drop_duplicates: true,
            drop_isolated: true,
            keep_weights: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphSource {
    pub format: GraphFormat,
    pub path: PathBuf,
    pub options: GraphOptions,
}

impl GraphSource {
    pub fn new(path: impl Into<PathBuf>, options: GraphOptions) -> Self {
        let path = path.into();
        GraphSource {
            format: GraphFormat::from_path(&path),
            path,
            options,
        }
    }
}

/// A matrix together with the original id of every row.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub matrix: SparseMatrix,
    /// `node_ids[k]` is the id in the source file of internal node `k`.
    pub node_ids: Vec<u64>,
    pub directed: bool,
}

impl LoadedGraph {
    /// Number of undirected edges when symmetric, stored arcs otherwise.
    pub fn edge_count(&self) -> usize {
        if self.directed {
            self.matrix.nnz()
        } else {
            let loops = (0..self.matrix.n()).filter(|&i| self.matrix.get(i, i) != 0.0).count();
            (self.matrix.nnz() - loops) / 2 + loops
        }
    }
}

struct RawGraph {
    // Declared dimension; edge lists use max id + 1.
    n: u64,
    edges: Vec<(u64, u64, f64)>,
    // Matrix Market "symmetric" forces undirected handling.
    symmetric: bool,
}

pub fn load_graph(source: &GraphSource) -> Result<LoadedGraph> {
    let file = File::open(&source.path).map_err(|e| Error::Io {
        path: source.path.clone(),
        source: e,
    })?;
    let reader = BufReader::new(file);
    let raw = match source.format {
        GraphFormat::EdgeList => parse_edge_list(reader, &source.path, source.options.keep_weights)?,
        GraphFormat::MatrixMarket => parse_matrix_market(reader, &source.path)?,
    };
    build_graph(raw, &source.options)
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn parse_edge_list(reader: impl BufRead, path: &Path, keep_weights: bool) -> Result<RawGraph> {
    let mut edges = Vec::new();
    let mut max_id = None::<u64>;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') || text.starts_with('%') {
            continue;
        }
        let mut tokens = text.split_whitespace();
        let (Some(u), Some(v)) = (tokens.next(), tokens.next()) else {
            return Err(parse_err(path, lineno, "expected two node ids"));
        };
        let u: u64 = u
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("invalid node id {u:?}")))?;
        let v: u64 = v
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("invalid node id {v:?}")))?;
        let w = match tokens.next() {
            Some(tok) if keep_weights => tok
                .parse::<f64>()
                .ok()
                .filter(|w| w.is_finite())
                .ok_or_else(|| parse_err(path, lineno, format!("invalid edge weight {tok:?}")))?,
            _ => 1.0,
        };
        max_id = Some(max_id.map_or(u.max(v), |m| m.max(u).max(v)));
        edges.push((u, v, w));
    }
    Ok(RawGraph {
        n: max_id.map_or(0, |m| m + 1),
        edges,
        symmetric: false,
    })
}

fn parse_matrix_market(reader: impl BufRead, path: &Path) -> Result<RawGraph> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => l.map_err(|e| io_err(path, e))?,
        None => return Err(parse_err(path, 1, "missing %%MatrixMarket header")),
    };
    let fields: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_err(path, 1, "malformed %%MatrixMarket header"));
    }
    if fields[2] != "coordinate" {
        return Err(parse_err(path, 1, "only coordinate format is supported"));
    }
    let pattern = match fields[3].as_str() {
        "pattern" => true,
        "real" | "integer" => false,
        other => return Err(parse_err(path, 1, format!("unsupported field type {other:?}"))),
    };
    let symmetric = match fields[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(path, 1, format!("unsupported symmetry {other:?}"))),
    };

    let mut size: Option<(u64, usize)> = None;
    let mut edges = Vec::new();
    let mut last_line = 1;
    for (idx, line) in lines {
        let lineno = idx + 1;
        last_line = lineno;
        let line = line.map_err(|e| io_err(path, e))?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('%') {
            continue;
        }
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let Some((n, _)) = size else {
            if tokens.len() != 3 {
                return Err(parse_err(path, lineno, "expected size line \"rows cols entries\""));
            }
            let parse = |t: &str| {
                t.parse::<u64>()
                    .map_err(|_| parse_err(path, lineno, format!("invalid size field {t:?}")))
            };
            let (rows, cols, nnz) = (parse(tokens[0])?, parse(tokens[1])?, parse(tokens[2])?);
            if rows != cols {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("adjacency matrix must be square, got {rows}x{cols}"),
                ));
            }
            size = Some((rows, nnz as usize));
            edges.reserve(nnz as usize);
            continue;
        };
        let expected = if pattern { 2 } else { 3 };
        if tokens.len() < expected {
            return Err(parse_err(path, lineno, format!("expected {expected} fields")));
        }
        let index = |t: &str| -> Result<u64> {
            match t.parse::<u64>() {
                Ok(k) if k >= 1 && k <= n => Ok(k - 1),
                _ => Err(parse_err(path, lineno, format!("index {t:?} outside 1..={n}"))),
            }
        };
        let (i, j) = (index(tokens[0])?, index(tokens[1])?);
        let v = if pattern {
            1.0
        } else {
            tokens[2]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, lineno, format!("invalid value {:?}", tokens[2])))?
        };
        edges.push((i, j, v));
    }
    let Some((n, declared)) = size else {
        return Err(parse_err(path, last_line, "missing size line"));
    };
    if edges.len() != declared {
        return Err(parse_err(
            path,
            last_line,
            format!("header declares {declared} entries, found {}", edges.len()),
        ));
    }
    Ok(RawGraph { n, edges, symmetric })
}

fn build_graph(raw: RawGraph, opts: &GraphOptions) -> Result<LoadedGraph> {
    let undirected = raw.symmetric || !opts.directed;
    let mut edges = raw.edges;
    if opts.drop_loops {
        edges.retain(|e| e.0 != e.1);
    }
    if !opts.keep_weights {
        edges.iter_mut().for_each(|e| e.2 = 1.0);
    }
    if undirected {
        let mirrored: Vec<_> = edges
            .iter()
            .filter(|e| e.0 != e.1)
            .map(|&(u, v, w)| (v, u, w))
            .collect();
        edges.extend(mirrored);
    }
    edges.sort_by_key(|e| (e.0, e.1));
    if opts.drop_duplicates {
        edges.dedup_by(|b, a| a.0 == b.0 && a.1 == b.1);
    }
    if edges.is_empty() {
        return Err(Error::degenerate("graph has no edges after filtering"));
    }

    let n = usize::try_from(raw.n).map_err(|_| Error::Resource(format!("node count {} too large", raw.n)))?;
    let (node_ids, remap): (Vec<u64>, Vec<usize>) = if opts.drop_isolated {
        let mut used = vec![false; n];
        for &(u, v, _) in &edges {
            used[u as usize] = true;
            used[v as usize] = true;
        }
        let mut remap = vec![usize::MAX; n];
        let mut ids = Vec::new();
        for (old, _) in used.iter().enumerate().filter(|(_, &u)| u) {
            remap[old] = ids.len();
            ids.push(old as u64);
        }
        (ids, remap)
    } else {
        ((0..raw.n).collect(), (0..n).collect())
    };

    let matrix = SparseMatrix::from_triplets(
        node_ids.len(),
        edges.iter().map(|&(u, v, w)| (remap[u as usize], remap[v as usize], w)),
    )?
    .with_symmetric_hint(undirected);
    if matrix.is_empty() {
        return Err(Error::degenerate("graph has no edges after filtering"));
    }
    Ok(LoadedGraph {
        matrix,
        node_ids,
        directed: !undirected,
    })
}

/// Writes one `u v` line per stored entry, using `node_ids` for labels.
///
/// Undirected graphs are written with each edge once (`u <= v`).
pub fn write_edge_list(path: &Path, matrix: &SparseMatrix, node_ids: &[u64], undirected: bool) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "# nodes {} stored_entries {}", matrix.n(), matrix.nnz())?;
        for (i, j, _) in matrix.triplets() {
            if undirected && j < i {
                continue;
            }
            writeln!(out, "{} {}", node_ids[i], node_ids[j])?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| io_err(path, e))
}
