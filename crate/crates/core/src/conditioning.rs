//! Data-conditioning analysis: train a fixed-budget model on each dataset
//! of a quality-knob family, evaluate it on every other, and study the
//! matrix Δ(k, k′) = L(k, k′) − L(k′, k′) and the dominance relation it
//! induces (an edge k → k′ says "training on k is at least as good for k′
//! as training on k′ itself", beyond seed noise).

use std::io::Write as IoWrite;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{perm_transform, split_holdout, Corpus, PermSpec};
use crate::error::{Error, Result};
use crate::fsutil::atomic_write;
use crate::hash::derive_seed;
use crate::lm::{eval_xent, train_lm, LMConfig};

/// One dataset of a quality family: the knob value plus disjoint
/// train/eval corpora.
#[derive(Debug, Clone)]
pub struct DatasetPair {
    pub k: f64,
    pub train: Corpus,
    pub eval: Corpus,
}

/// Cross-loss matrix over a quality grid. `losses[i][j]` is the mean eval
/// loss on dataset j of models trained on dataset i; `stds` are per-cell
/// sample standard deviations over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossMatrix {
    pub k_grid: Vec<f64>,
    pub losses: Vec<Vec<f64>>,
    pub stds: Vec<Vec<f64>>,
    pub seeds: usize,
}

impl LossMatrix {
    pub fn validate(&self) -> Result<()> {
        let n = self.k_grid.len();
        if n < 2 {
            return Err(Error::Config("loss matrix needs ≥ 2 grid points".into()));
        }
        if self.losses.len() != n || self.stds.len() != n {
            return Err(Error::DimMismatch {
                expected: n,
                got: self.losses.len().max(self.stds.len()),
            });
        }
        for row in self.losses.iter().chain(self.stds.iter()) {
            if row.len() != n {
                return Err(Error::DimMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("loss matrix".into()));
            }
        }
        if self.stds.iter().flatten().any(|&s| s < 0.0) {
            return Err(Error::Domain("negative standard deviation".into()));
        }
        if self.k_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("k grid must be strictly ascending".into()));
        }
        Ok(())
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("serialize loss matrix: {e}")))?;
        atomic_write(path, |w| {
            w.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))
        })
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: LossMatrix = serde_json::from_str(&body)
            .map_err(|e| Error::Format(format!("{}: loss matrix JSON: {e}", path.display())))?;
        m.validate()?;
        Ok(m)
    }
}

/// Train one model per (grid point, seed) and evaluate it on every grid
/// point. Cells are independent rayon jobs merged by index, so the result
/// is deterministic.
pub fn build_loss_matrix(
    family: &[DatasetPair],
    cfg: &LMConfig,
    seeds: usize,
) -> Result<LossMatrix> {
    if family.len() < 2 {
        return Err(Error::Config(format!(
            "conditioning needs ≥ 2 grid points, got {}",
            family.len()
        )));
    }
    if seeds < 1 {
        return Err(Error::Config("need ≥ 1 seed".into()));
    }
    if family.windows(2).any(|w| !(w[0].k < w[1].k)) {
        return Err(Error::Config("family grid must be strictly ascending in k".into()));
    }
    cfg.validate()?;

    let n = family.len();
    let jobs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..seeds).map(move |s| (i, s)))
        .collect();
    // replicate[i][s][j]: loss on dataset j of the model trained on
    // dataset i with replicate seed s.
    let rows: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(i, s)| -> Result<Vec<f64>> {
            let mut job_cfg = cfg.clone();
            job_cfg.seed = derive_seed(cfg.seed, (i as u64) << 32 | s as u64);
            let model = train_lm(&family[i].train, &job_cfg).map_err(|e| {
                Error::Config(format!(
                    "loss-matrix training failed at cell (k={}, seed {s}): {e}",
                    family[i].k
                ))
            })?;
            family
                .iter()
                .map(|pair| {
                    eval_xent(&model, &pair.eval).map_err(|e| {
                        Error::Config(format!(
                            "loss-matrix evaluation failed at cell (k={}, k'={}, seed {s}): {e}",
                            family[i].k, pair.k
                        ))
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut losses = vec![vec![0.0; n]; n];
    let mut stds = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let cell: Vec<f64> = (0..seeds)
                .map(|s| rows[i * seeds + s][j])
                .collect();
            let mean = cell.iter().sum::<f64>() / seeds as f64;
            losses[i][j] = mean;
            if seeds > 1 {
                let var = cell.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
                    / (seeds - 1) as f64;
                stds[i][j] = var.sqrt();
            }
        }
    }
    let m = LossMatrix {
        k_grid: family.iter().map(|p| p.k).collect(),
        losses,
        stds,
        seeds,
    };
    m.validate()?;
    Ok(m)
}

/// Δ[i][j] = L[i][j] − L[j][j]; the diagonal is identically zero.
pub fn delta_matrix(m: &LossMatrix) -> Result<Vec<Vec<f64>>> {
    m.validate()?;
    let n = m.k_grid.len();
    let mut delta = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            delta[i][j] = m.losses[i][j] - m.losses[j][j];
        }
    }
    Ok(delta)
}

/// A significant dominance edge: training on `src` beats native training
/// on `dst` by `margin` nats (margin = −Δ[src][dst] > 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationEdge {
    pub src: usize,
    pub dst: usize,
    pub margin: f64,
}

/// The ≻ relation over grid points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationGraph {
    /// Node labels: the k values, ascending.
    pub nodes: Vec<f64>,
    pub edges: Vec<RelationEdge>,
    pub sigma_mult: f64,
}

/// Edge i→j iff Δ[i][j] < −sigma_mult · std[j][j]. Self-edges are
/// impossible because Δ[i][i] = 0.
pub fn relation_graph(
    k_grid: &[f64],
    delta: &[Vec<f64>],
    stds: &[Vec<f64>],
    sigma_mult: f64,
) -> Result<RelationGraph> {
    let n = k_grid.len();
    if delta.len() != n || stds.len() != n || delta.iter().any(|r| r.len() != n)
        || stds.iter().any(|r| r.len() != n)
    {
        return Err(Error::DimMismatch {
            expected: n,
            got: delta.len().max(stds.len()),
        });
    }
    if !(sigma_mult >= 0.0) {
        return Err(Error::Domain(format!(
            "sigma_mult must be ≥ 0, got {sigma_mult}"
        )));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if delta[i][j] < -sigma_mult * stds[j][j] {
                edges.push(RelationEdge {
                    src: i,
                    dst: j,
                    margin: -delta[i][j],
                });
            }
        }
    }
    Ok(RelationGraph {
        nodes: k_grid.to_vec(),
        edges,
        sigma_mult,
    })
}

/// Structural diagnostics of the dominance relation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderingReport {
    pub is_transitive: bool,
    pub is_total_order: bool,
    /// Strongly connected components with ≥ 2 nodes (node indices,
    /// ascending within each cycle).
    pub cycles: Vec<Vec<usize>>,
    /// Edges src→dst with src later in the grid than dst.
    pub backward_edges: usize,
    pub edge_count: usize,
}

pub fn ordering_report(g: &RelationGraph) -> OrderingReport {
    let n = g.nodes.len();
    let mut adj = vec![vec![false; n]; n];
    for e in &g.edges {
        adj[e.src][e.dst] = true;
    }
    let mut is_transitive = true;
    'outer: for i in 0..n {
        for j in 0..n {
            if !adj[i][j] {
                continue;
            }
            for l in 0..n {
                if adj[j][l] && l != i && !adj[i][l] {
                    is_transitive = false;
                    break 'outer;
                }
            }
        }
    }
    let mut is_total = true;
    for i in 0..n {
        for j in (i + 1)..n {
            if !adj[i][j] && !adj[j][i] {
                is_total = false;
            }
        }
    }
    let cycles = strongly_connected_cycles(&adj);
    let is_total_order = is_transitive && is_total && cycles.is_empty();
    OrderingReport {
        is_transitive,
        is_total_order,
        cycles,
        backward_edges: g.edges.iter().filter(|e| e.src > e.dst).count(),
        edge_count: g.edges.len(),
    }
}

/// Tarjan SCC; returns components of size ≥ 2 (each sorted), in a
/// deterministic order.
fn strongly_connected_cycles(adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut out: Vec<Vec<usize>> = Vec::new();

    // Iterative Tarjan with an explicit work stack (frame = node, child).
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&mut (v, ref mut child)) = work.last_mut() {
            if *child == 0 {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            let mut advanced = false;
            while *child < n {
                let w = *child;
                *child += 1;
                if !adj[v][w] {
                    continue;
                }
                if index[w] == usize::MAX {
                    work.push((w, 0));
                    advanced = true;
                    break;
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            }
            if advanced {
                continue;
            }
            // v is finished.
            work.pop();
            if let Some(&(parent, _)) = work.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                while let Some(w) = stack.pop() {
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                if comp.len() >= 2 {
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
    }
    out.sort();
    out
}

/// Build the token-permutation quality family: split the base corpus into
/// train/eval once, then apply the permutation knob at each k with a fixed
/// seed, so higher k strictly extends the set of permuted documents.
pub fn perm_family(
    base: &Corpus,
    k_grid: &[f64],
    holdout_fraction: f64,
    seed: u64,
) -> Result<Vec<DatasetPair>> {
    if k_grid.len() < 2 {
        return Err(Error::Config("perm family needs ≥ 2 grid points".into()));
    }
    if k_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("perm family grid must be strictly ascending".into()));
    }
    let (train, eval) = split_holdout(base, holdout_fraction, derive_seed(seed, 0))?;
    k_grid
        .iter()
        .map(|&k| {
            Ok(DatasetPair {
                k,
                train: perm_transform(&train, &PermSpec { k, seed: derive_seed(seed, 1) })?,
                eval: perm_transform(&eval, &PermSpec { k, seed: derive_seed(seed, 2) })?,
            })
        })
        .collect()
}

/// CSV with a header row/column of k values.
pub fn write_matrix_csv(k_grid: &[f64], matrix: &[Vec<f64>], path: &Path) -> Result<()> {
    atomic_write(path, |w| {
        let header: Vec<String> = k_grid.iter().map(|k| k.to_string()).collect();
        writeln!(w, "k,{}", header.join(",")).map_err(|e| Error::io(path, e))?;
        for (k, row) in k_grid.iter().zip(matrix) {
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{k},{}", cells.join(",")).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    })
}

/// Edge list "src_k,dst_k,margin", one line per significant edge.
pub fn write_edge_list(g: &RelationGraph, path: &Path) -> Result<()> {
    atomic_write(path, |w| {
        writeln!(w, "src,dst,margin").map_err(|e| Error::io(path, e))?;
        for e in &g.edges {
            writeln!(w, "{},{},{}", g.nodes[e.src], g.nodes[e.dst], e.margin)
                .map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    })
}
