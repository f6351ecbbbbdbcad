//! Speaker embedding via the max-cut semidefinite relaxation.
//!
//! Each speaker gets a unit vector in `R^n` (n = number of speakers) so as to
//! maximise `sum_{uv} w_uv (1 - <u, v>) / 2`. The program is solved in its
//! full-rank factorised form by block-coordinate ascent: each sweep replaces
//! every vector by the unit vector pointing away from the weighted sum of its
//! neighbours, which is the exact maximiser of the objective in that block.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::corpus::{SpeakerId, StanceLabel};
use crate::graph::InteractionNetwork;

/// Largest graph the exhaustive max-cut oracle accepts.
pub const BRUTE_FORCE_MAX_NODES: usize = 22;

#[derive(Debug, Error, PartialEq)]
pub enum EmbedError {
    #[error("cannot embed a graph with {nodes} nodes and {edges} edges (need >= 2 nodes and >= 1 edge)")]
    EmptyCore { nodes: usize, edges: usize },
    #[error("embedding does not match the graph: {0}")]
    DimensionMismatch(String),
    #[error("exhaustive max-cut limited to {max} nodes, got {nodes}")]
    TooLarge { nodes: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_sweeps: usize,
    /// Stop once a sweep improves the objective by less than
    /// `rel_tol * |objective|`.
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_sweeps: 2000,
            rel_tol: 1e-10,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_sweeps == 0 {
            return Err("max_sweeps must be positive".into());
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(format!("rel_tol must be positive, got {}", self.rel_tol));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerEmbedding {
    /// Speakers in ascending id order; `vectors[i]` belongs to `order[i]`.
    pub order: Vec<SpeakerId>,
    pub vectors: Vec<Vec<f64>>,
    pub objective: f64,
    /// Number of completed sweeps.
    pub iterations: usize,
    /// False when the sweep budget ran out before the tolerance was met; the
    /// vectors are then the last iterate.
    pub converged: bool,
}

impl SpeakerEmbedding {
    pub fn dim(&self) -> usize {
        self.order.len()
    }

    pub fn index_of(&self, s: &SpeakerId) -> Option<usize> {
        self.order.binary_search(s).ok()
    }

    pub fn vector(&self, s: &SpeakerId) -> Option<&[f64]> {
        self.index_of(s).map(|i| self.vectors[i].as_slice())
    }

    /// Writes `speaker,dim_0,...,dim_{n-1}` CSV.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["speaker".to_string()];
        header.extend((0..self.dim()).map(|i| format!("dim_{i}")));
        w.write_record(&header)?;
        for (s, v) in self.order.iter().zip(&self.vectors) {
            let mut row = vec![s.to_string()];
            row.extend(v.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Index-based adjacency of a network, in node order.
struct Indexed {
    order: Vec<SpeakerId>,
    adj: Vec<Vec<(usize, f64)>>,
    edges: Vec<(usize, usize, f64)>,
}

impl Indexed {
    fn new(g: &InteractionNetwork) -> Self {
        let order: Vec<SpeakerId> = g.nodes().cloned().collect();
        let pos: BTreeMap<&SpeakerId, usize> = order.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let mut adj = vec![Vec::new(); order.len()];
        let mut edges = Vec::with_capacity(g.edge_count());
        for (u, v, w) in g.edges() {
            let (i, j) = (pos[u], pos[v]);
            adj[i].push((j, w));
            adj[j].push((i, w));
            edges.push((i, j, w));
        }
        Indexed { order, adj, edges }
    }

    fn objective(&self, vectors: &[Vec<f64>]) -> f64 {
        self.edges
            .iter()
            .map(|&(i, j, w)| w * (1.0 - dot(&vectors[i], &vectors[j])) / 2.0)
            .sum()
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Maximises the relaxed cut over unit vectors. The graph needs at least two
/// speakers and one edge.
pub fn solve_embedding(
    g: &InteractionNetwork,
    cfg: &SolverConfig,
) -> Result<SpeakerEmbedding, EmbedError> {
    if g.node_count() < 2 || g.edge_count() == 0 {
        return Err(EmbedError::EmptyCore {
            nodes: g.node_count(),
            edges: g.edge_count(),
        });
    }
    let idx = Indexed::new(g);
    let n = idx.order.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut vectors: Vec<Vec<f64>> = (0..n).map(|_| random_unit(&mut rng, n)).collect();

    let mut objective = idx.objective(&vectors);
    let mut grad = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_sweeps {
        for i in 0..n {
            grad.iter_mut().for_each(|x| *x = 0.0);
            let mut scale = 0.0;
            for &(j, w) in &idx.adj[i] {
                scale += w;
                for (gk, vk) in grad.iter_mut().zip(&vectors[j]) {
                    *gk += w * vk;
                }
            }
            let gn = norm(&grad);
            // zero pull: every unit vector is optimal, keep the current one
            if gn <= 1e-14 * scale {
                continue;
            }
            for (vk, gk) in vectors[i].iter_mut().zip(&grad) {
                *vk = -gk / gn;
            }
        }
        iterations += 1;
        let next = idx.objective(&vectors);
        let gain = next - objective;
        objective = next;
        if gain < cfg.rel_tol * objective.abs() {
            converged = true;
            break;
        }
    }

    Ok(SpeakerEmbedding {
        order: idx.order,
        vectors,
        objective,
        iterations,
        converged,
    })
}

/// Evaluates the relaxed cut objective of `emb` on the edges of `g`.
pub fn objective_value(g: &InteractionNetwork, emb: &SpeakerEmbedding) -> Result<f64, EmbedError> {
    if emb.vectors.len() != emb.order.len() {
        return Err(EmbedError::DimensionMismatch(format!(
            "{} speakers but {} vectors",
            emb.order.len(),
            emb.vectors.len()
        )));
    }
    if let Some(d) = emb.vectors.first().map(Vec::len) {
        if emb.vectors.iter().any(|v| v.len() != d) {
            return Err(EmbedError::DimensionMismatch("vectors of unequal length".into()));
        }
    }
    let mut total = 0.0;
    for s in g.nodes() {
        if emb.index_of(s).is_none() {
            return Err(EmbedError::DimensionMismatch(format!("no vector for speaker {s}")));
        }
    }
    for (u, v, w) in g.edges() {
        let (a, b) = (emb.vector(u).unwrap(), emb.vector(v).unwrap());
        total += w * (1.0 - dot(a, b)) / 2.0;
    }
    Ok(total)
}

/// Largest deviation `|| u + g/||g|| ||` over speakers with a nonzero
/// neighbour pull `g = sum_v w_uv v`. Zero at a fixed point of the sweep.
pub fn stationarity_residual(g: &InteractionNetwork, emb: &SpeakerEmbedding) -> f64 {
    let idx = Indexed::new(g);
    let mut worst: f64 = 0.0;
    for (i, s) in idx.order.iter().enumerate() {
        let Some(u) = emb.vector(s) else { continue };
        let mut grad = vec![0.0; u.len()];
        for &(j, w) in &idx.adj[i] {
            let v = emb.vector(&idx.order[j]).expect("covered");
            for (gk, vk) in grad.iter_mut().zip(v) {
                *gk += w * vk;
            }
        }
        let gn = norm(&grad);
        if gn <= 1e-12 {
            continue;
        }
        let r: f64 = u
            .iter()
            .zip(&grad)
            .map(|(uk, gk)| (uk + gk / gn).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(r);
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxCut {
    pub value: f64,
    pub partition: BTreeMap<SpeakerId, StanceLabel>,
}

/// Exact maximum-weight cut by enumerating the `2^(n-1)` bipartitions that
/// keep the smallest speaker on `SideA`, in Gray-code order.
pub fn brute_force_maxcut(g: &InteractionNetwork) -> Result<MaxCut, EmbedError> {
    let n = g.node_count();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(EmbedError::TooLarge {
            nodes: n,
            max: BRUTE_FORCE_MAX_NODES,
        });
    }
    let idx = Indexed::new(g);
    let mut side = vec![false; n];
    let mut cut = 0.0;
    let mut best = (0.0, side.clone());
    let free = n.saturating_sub(1);
    for step in 1u64..(1u64 << free) {
        // node 0 stays fixed; flip node 1 + (index of lowest set bit)
        let k = 1 + step.trailing_zeros() as usize;
        let mut delta = 0.0;
        for &(j, w) in &idx.adj[k] {
            delta += if side[j] == side[k] { w } else { -w };
        }
        side[k] = !side[k];
        cut += delta;
        if cut > best.0 {
            best = (cut, side.clone());
        }
    }
    // recompute from scratch to drop accumulated rounding
    let value = idx
        .edges
        .iter()
        .filter(|&&(i, j, _)| best.1[i] != best.1[j])
        .map(|&(_, _, w)| w)
        .sum();
    let partition = idx
        .order
        .into_iter()
        .zip(best.1)
        .map(|(s, b)| (s, if b { StanceLabel::SideB } else { StanceLabel::SideA }))
        .collect();
    Ok(MaxCut { value, partition })
}
