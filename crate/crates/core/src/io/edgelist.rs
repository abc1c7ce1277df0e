use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::AdjacencyMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetrize {
    /// Keep edge direction. The result is undirected only if the file lists both directions.
    #[default]
    None,
    /// `max(A, Aᵀ)`.
    Max,
    /// `(A + Aᵀ) / 2`.
    Mean,
}

impl fmt::Display for Symmetrize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Symmetrize::None => "none",
            Symmetrize::Max => "max",
            Symmetrize::Mean => "mean",
        })
    }
}

impl FromStr for Symmetrize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Symmetrize::None),
            "max" => Ok(Symmetrize::Max),
            "mean" => Ok(Symmetrize::Mean),
            other => Err(Error::Input(format!(
                "unknown symmetrize policy '{other}' (none|max|mean)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct EdgeListOptions {
    /// Number of nodes (rows). Ids at or beyond it are an error; unreferenced ids below it
    /// become isolated nodes. Inferred from the largest id when absent.
    pub n_hint: Option<usize>,
    pub symmetrize: Symmetrize,
    /// Read a third `weight` column; otherwise every row counts 1.
    pub weighted: bool,
    /// Ids start at 1 instead of 0.
    pub one_based: bool,
    /// Sources index rows and destinations index a separate column set.
    pub bipartite: bool,
    /// Column count for bipartite input, inferred when absent.
    pub n_cols: Option<usize>,
}

struct Edge {
    line: usize,
    src: usize,
    dst: usize,
    weight: f64,
}

/// Reads a `src,dst[,weight]` edge list into a dense matrix. Duplicate edges are summed before
/// symmetrizing. A first line whose ids are not integers is treated as a header; lines starting
/// with `#` are skipped.
pub fn load_edgelist(path: impl AsRef<Path>, opts: &EdgeListOptions) -> Result<AdjacencyMatrix> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;

    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut edges = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(k + 1);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if record.len() < 2 {
            return Err(parse_err(
                line,
                format!("expected src,dst[,weight], found {} field(s)", record.len()),
            ));
        }
        let ids = (record[0].parse::<i64>(), record[1].parse::<i64>());
        let (src, dst) = match ids {
            (Ok(s), Ok(d)) => (s, d),
            _ if edges.is_empty() && k == 0 => continue,
            _ => {
                return Err(parse_err(
                    line,
                    format!("node ids must be integers, found '{}','{}'", &record[0], &record[1]),
                ))
            }
        };
        let offset = i64::from(opts.one_based);
        let to_index = |id: i64| -> Result<usize> {
            let idx = id - offset;
            if idx < 0 {
                return Err(parse_err(line, format!("node id {id} is below the first id {offset}")));
            }
            Ok(idx as usize)
        };
        let weight = if opts.weighted && record.len() > 2 && !record[2].is_empty() {
            let w: f64 = record[2]
                .parse()
                .map_err(|_| parse_err(line, format!("weight '{}' is not a number", &record[2])))?;
            if !w.is_finite() {
                return Err(parse_err(line, format!("weight {w} is not finite")));
            }
            w
        } else {
            1.0
        };
        edges.push(Edge {
            line,
            src: to_index(src)?,
            dst: to_index(dst)?,
            weight,
        });
    }

    let max_src = edges.iter().map(|e| e.src + 1).max().unwrap_or(0);
    let max_dst = edges.iter().map(|e| e.dst + 1).max().unwrap_or(0);
    let (rows, cols) = if opts.bipartite {
        (opts.n_hint.unwrap_or(max_src), opts.n_cols.unwrap_or(max_dst))
    } else {
        let n = opts.n_hint.unwrap_or(max_src.max(max_dst));
        (n, n)
    };
    if rows == 0 || cols == 0 {
        return Err(Error::Input(format!(
            "{}: edge list is empty and no node count was given",
            path.display()
        )));
    }

    let mut a = Array2::<f64>::zeros((rows, cols));
    for e in &edges {
        if e.src >= rows || e.dst >= cols {
            return Err(parse_err(
                e.line,
                format!(
                    "edge ({}, {}) is out of bounds for a {rows}x{cols} network",
                    e.src, e.dst
                ),
            ));
        }
        a[[e.src, e.dst]] += e.weight;
    }

    if opts.bipartite {
        if opts.symmetrize != Symmetrize::None {
            return Err(Error::Input("bipartite networks cannot be symmetrized".into()));
        }
        return AdjacencyMatrix::bipartite(a);
    }
    match opts.symmetrize {
        Symmetrize::None => AdjacencyMatrix::new(a),
        Symmetrize::Max => {
            let t = a.t().to_owned();
            a.zip_mut_with(&t, |x, &y| *x = x.max(y));
            AdjacencyMatrix::undirected(a)
        }
        Symmetrize::Mean => {
            let t = a.t().to_owned();
            a.zip_mut_with(&t, |x, &y| *x = 0.5 * (*x + y));
            AdjacencyMatrix::undirected(a)
        }
    }
}
