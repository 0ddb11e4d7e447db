//! Directed attributed-graph construction: cosine similarities, k-nearest
//! neighbor selection, and normalized edge weights, with the self-loop of
//! the initialized matrix M = A + E realized implicitly by including the
//! node's own vector during aggregation (never by a self edge).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::num::{dot, norm_sq, real, Real};

/// Adjacency-list form of the attributed graph. `neighbors[i]` holds the
/// k most similar nodes to `i`, most similar first, ties broken by the
/// smaller id; `weights[i]` are the matching normalized edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph<T: Real> {
    pub m: usize,
    pub k: usize,
    pub neighbors: Vec<Vec<usize>>,
    pub weights: Vec<Vec<T>>,
    /// M includes the identity; aggregation must fold in the node itself.
    pub self_loop: bool,
}

impl<T: Real> AttributedGraph<T> {
    /// Dense M = A + E for small graphs; row i holds node i's out-edges.
    pub fn dense_m(&self) -> Vec<Vec<T>> {
        let mut m = vec![vec![T::zero(); self.m]; self.m];
        for i in 0..self.m {
            for (&j, &w) in self.neighbors[i].iter().zip(&self.weights[i]) {
                m[i][j] = m[i][j] + w;
            }
            if self.self_loop {
                m[i][i] = m[i][i] + T::one();
            }
        }
        m
    }
}

const NORM_GUARD: f64 = 1e-12;

/// Cosine similarity; 0 when either vector's norm falls below 1e-12.
pub fn cosine_similarity<T: Real>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::DimMismatch {
            context: "cosine_similarity",
            expected: u.len(),
            got: v.len(),
        });
    }
    let nu = norm_sq(u).sqrt();
    let nv = norm_sq(v).sqrt();
    let guard = real::<T>(NORM_GUARD);
    if nu < guard || nv < guard {
        return Ok(T::zero());
    }
    Ok(dot(u, v) / (nu * nv))
}

/// The k highest-similarity (id, sim) pairs, descending, ties to smaller id.
fn top_k<T: Real>(mut sims: Vec<(usize, T)>, k: usize) -> Vec<(usize, T)> {
    sims.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    sims.truncate(k);
    sims
}

fn all_sims<T: Real>(matrix: &FeatureMatrix<T>, i: usize) -> Result<Vec<(usize, T)>> {
    let m = matrix.m();
    let mut sims = Vec::with_capacity(m - 1);
    for j in 0..m {
        if j != i {
            sims.push((j, cosine_similarity(matrix.row(i), matrix.row(j))?));
        }
    }
    Ok(sims)
}

/// The k nodes most similar to node `i` (cosine on the feature rows),
/// sorted by similarity descending, ties broken by smaller id.
pub fn knn_neighbors<T: Real>(matrix: &FeatureMatrix<T>, i: usize, k: usize) -> Result<Vec<usize>> {
    let m = matrix.m();
    if k < 1 || k > m.saturating_sub(1) {
        return Err(Error::InvalidParam {
            name: "k",
            message: format!("need 1 <= k <= m-1 = {}, got {k}", m.saturating_sub(1)),
        });
    }
    Ok(top_k(all_sims(matrix, i)?, k)
        .into_iter()
        .map(|(j, _)| j)
        .collect())
}

/// Normalize the selected neighbors' similarities into edge weights:
/// negatives clamp to zero first; if everything clamps away, fall back to
/// uniform 1/k.
pub fn edge_weights<T: Real>(sims: &[T]) -> Vec<T> {
    let clamped: Vec<T> = sims.iter().map(|&s| s.max(T::zero())).collect();
    let total = clamped.iter().fold(T::zero(), |a, &v| a + v);
    if total < real(NORM_GUARD) {
        let uniform = T::one() / crate::num::real_of(sims.len().max(1));
        return vec![uniform; sims.len()];
    }
    clamped.into_iter().map(|v| v / total).collect()
}

/// Build the full graph from a standardized feature matrix. O(m^2)
/// pairwise similarities; fine at this scale.
pub fn build_graph<T: Real>(matrix: &FeatureMatrix<T>, k: usize) -> Result<AttributedGraph<T>> {
    let m = matrix.m();
    if m < 2 {
        return Err(Error::Insufficient {
            what: "nodes",
            needed: 2,
            got: m,
        });
    }
    if k < 1 || k > m - 1 {
        return Err(Error::InvalidParam {
            name: "k",
            message: format!("need 1 <= k <= m-1 = {}, got {k}", m - 1),
        });
    }

    let mut neighbors = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for i in 0..m {
        let chosen = top_k(all_sims(matrix, i)?, k);
        let sims: Vec<T> = chosen.iter().map(|&(_, s)| s).collect();
        weights.push(edge_weights(&sims));
        neighbors.push(chosen.into_iter().map(|(j, _)| j).collect());
    }
    Ok(AttributedGraph {
        m,
        k,
        neighbors,
        weights,
        self_loop: true,
    })
}

/// Largest node count the dense export will serialize.
pub const DENSE_EXPORT_LIMIT: usize = 1000;

/// Edge-list CSV `src,dst,weight`.
pub fn write_graph_csv<T: Real>(graph: &AttributedGraph<T>, path: &Path) -> Result<()> {
    let mut out = String::from("src,dst,weight\n");
    for i in 0..graph.m {
        for (&j, &w) in graph.neighbors[i].iter().zip(&graph.weights[i]) {
            out.push_str(&format!("{i},{j},{w}\n"));
        }
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Read a graph written by [`write_graph_csv`]. Neighbor order is the row
/// order, which preserves the similarity-descending construction order.
pub fn read_graph_csv<T: Real>(path: &Path, m: usize) -> Result<AttributedGraph<T>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut weights: Vec<Vec<T>> = vec![Vec::new(); m];
    for (idx, line) in text.lines().enumerate().skip(1) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: idx + 1,
                message: format!("expected src,dst,weight, got {line:?}"),
            });
        }
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            row: idx + 1,
            message,
        };
        let src: usize = fields[0]
            .parse()
            .map_err(|_| bad(format!("bad src {:?}", fields[0])))?;
        let dst: usize = fields[1]
            .parse()
            .map_err(|_| bad(format!("bad dst {:?}", fields[1])))?;
        let w: f64 = fields[2]
            .parse()
            .map_err(|_| bad(format!("bad weight {:?}", fields[2])))?;
        if src >= m || dst >= m {
            return Err(bad(format!("node id out of range 0..{m}")));
        }
        neighbors[src].push(dst);
        weights[src].push(real(w));
    }
    let k = neighbors.first().map_or(0, |n| n.len());
    if k == 0 || neighbors.iter().any(|n| n.len() != k) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "graph rows do not share a uniform out-degree".into(),
        });
    }
    Ok(AttributedGraph {
        m,
        k,
        neighbors,
        weights,
        self_loop: true,
    })
}

/// Dense M export as CSV, guarded against accidentally huge files.
pub fn write_dense_m_csv<T: Real>(graph: &AttributedGraph<T>, path: &Path) -> Result<()> {
    if graph.m > DENSE_EXPORT_LIMIT {
        return Err(Error::InvalidParam {
            name: "m",
            message: format!(
                "dense export limited to m <= {DENSE_EXPORT_LIMIT}, graph has {}",
                graph.m
            ),
        });
    }
    let dense = graph.dense_m();
    let mut out = String::new();
    for row in &dense {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
