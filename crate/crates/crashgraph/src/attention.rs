//! Retention-weighted ranking over the temporal graph and top-q chain
//! filtering.
//!
//! Scores flow along impact direction, weighted by each edge's memory
//! retention. Damping with uniform teleportation is added on top of the bare
//! recurrence: without it every score on a DAG drains into the sinks and the
//! ranking is useless. Dangling vertices redistribute their mass uniformly,
//! and each vertex's outgoing retention weights are normalized so the score
//! vector stays a probability vector at every iteration. With all retention
//! weights equal this reduces exactly to classical damped PageRank.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;

use crate::domain::Portfolio;
use crate::error::{Error, Result};
use crate::graph::{self, ImpactGraph, Vertex, VertexKind};
use crate::memory::{retention, DecayConfig};
use crate::par;

#[derive(Debug, Clone)]
pub struct RankConfig {
    /// Number of top entities whose chains survive filtering.
    pub q: usize,
    pub damping: f64,
    /// L1 change threshold for convergence.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for RankConfig {
    fn default() -> Self {
        RankConfig { q: 6, damping: 0.85, tolerance: 1e-8, max_iter: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct RankTable {
    pub scores: BTreeMap<Vertex, f64>,
    pub iterations_used: usize,
    pub converged: bool,
}

/// Power iteration over the temporal graph. Parallel same-pair edges use the
/// newest day's retention. Non-convergence at `max_iter` is not fatal: the
/// last iterate is still a usable ordering and is returned with
/// `converged = false`.
pub fn rank(
    graph: &ImpactGraph,
    decay: &DecayConfig,
    today: NaiveDate,
    cfg: &RankConfig,
) -> Result<RankTable> {
    rank_with_mass_trace(graph, decay, today, cfg).map(|(table, _)| table)
}

/// As `rank`, also returning the L1 mass of the score vector after each
/// iteration (diagnostic: it should stay at 1 up to rounding).
pub fn rank_with_mass_trace(
    graph: &ImpactGraph,
    decay: &DecayConfig,
    today: NaiveDate,
    cfg: &RankConfig,
) -> Result<(RankTable, Vec<f64>)> {
    if graph.is_empty() {
        return Err(Error::Data("rank requires a non-empty graph".into()));
    }
    let verts: Vec<&Vertex> = graph.vertices().collect();
    let n = verts.len();
    let index: BTreeMap<&Vertex, usize> = verts.iter().enumerate().map(|(i, v)| (*v, i)).collect();

    // Newest edge per (from, to) pair carries the retention weight.
    let mut newest: BTreeMap<(usize, usize), NaiveDate> = BTreeMap::new();
    for edge in graph.edges() {
        let key = (index[&edge.from], index[&edge.to]);
        let slot = newest.entry(key).or_insert(edge.day);
        *slot = (*slot).max(edge.day);
    }

    let mut out_weight = vec![0.0f64; n];
    let mut out_edges: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for ((from, to), day) in &newest {
        let weight = retention(decay, *day, today)?;
        out_edges[*from].push((*to, weight));
        out_weight[*from] += weight;
    }
    let mut in_edges: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for from in 0..n {
        for (to, weight) in &out_edges[from] {
            in_edges[*to].push((from, weight / out_weight[from]));
        }
    }
    let dangling: Vec<usize> = (0..n).filter(|v| out_edges[*v].is_empty()).collect();

    let d = cfg.damping;
    let uniform = 1.0 / n as f64;
    let mut scores = vec![uniform; n];
    let mut mass_trace = Vec::new();
    let mut iterations_used = 0;
    let mut converged = false;

    for iteration in 1..=cfg.max_iter {
        let dangling_mass: f64 = dangling.iter().map(|&v| scores[v]).sum();
        let base = (1.0 - d) * uniform + d * dangling_mass * uniform;
        let next = par::map_range(n, |v| {
            let inflow: f64 = in_edges[v].iter().map(|&(b, coef)| scores[b] * coef).sum();
            base + d * inflow
        });
        let l1_change: f64 = next.iter().zip(&scores).map(|(a, b)| (a - b).abs()).sum();
        scores = next;
        mass_trace.push(scores.iter().sum());
        iterations_used = iteration;
        if l1_change < cfg.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("rank did not converge within {} iterations", cfg.max_iter);
    }

    let table = RankTable {
        scores: verts.iter().map(|v| (*v).clone()).zip(scores).collect(),
        iterations_used,
        converged,
    };
    Ok((table, mass_trace))
}

/// The q highest-scoring entity vertices. Articles and stocks carry mass in
/// the ranking but are never selected. Ties break lexicographically by key;
/// fewer than q entities returns all of them.
pub fn select_top_q(table: &RankTable, q: usize) -> BTreeSet<String> {
    let mut entities: Vec<(&str, f64)> = table
        .scores
        .iter()
        .filter(|(v, _)| v.kind == VertexKind::Entity)
        .map(|(v, score)| (v.key.as_str(), *score))
        .collect();
    entities.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    entities.into_iter().take(q).map(|(key, _)| key.to_string()).collect()
}

/// Filtered sub-graph: the union of every article-to-stock chain that passes
/// through at least one of the selected entities. Equivalent to running
/// `enumerate_chains`, testing membership, and unioning with
/// `chains_to_subgraph`, but parallel same-pair days are unioned per hop
/// instead of being expanded combinatorially.
pub fn filter_chains(
    temporal: &ImpactGraph,
    top: &BTreeSet<String>,
    portfolio: &Portfolio,
) -> ImpactGraph {
    let tickers: BTreeSet<&str> = portfolio.members.iter().map(|s| s.ticker.as_str()).collect();
    let adjacency = temporal.adjacency();
    let mut filtered = ImpactGraph::new();
    for path in graph::stock_vertex_paths(temporal) {
        let end = path.last().expect("paths are non-empty");
        if !tickers.contains(end.key.as_str()) {
            continue;
        }
        let touches_top = path
            .iter()
            .any(|v| v.kind == VertexKind::Entity && top.contains(v.key.as_str()));
        if !touches_top {
            continue;
        }
        for hop in path.windows(2) {
            let days = adjacency
                .get(&hop[0])
                .and_then(|succ| succ.get(&hop[1]))
                .expect("path hops exist in the graph");
            for day in days {
                filtered
                    .add_edge(hop[0].clone(), hop[1].clone(), *day)
                    .expect("path hops are never self-loops");
            }
        }
    }
    filtered
}
