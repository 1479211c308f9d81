//! Impact graphs: vertices, dated edges, chains, and pure graph operations.
//!
//! A graph holds one day's brainstormed impacts, the memory-augmented union of
//! several days, or the attention-filtered subset fed to the reasoning prompt.
//! Graphs are value types: once a pipeline stage has built one it is treated
//! as an immutable snapshot and may be shared freely across worker threads.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::domain::Portfolio;
use crate::error::{Error, Result};
use crate::par;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum VertexKind {
    Article,
    Entity,
    Stock,
}

/// Graph vertex identified by `(kind, key)`. Keys are article ids, normalized
/// entity names, or member tickers.
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Vertex {
    pub kind: VertexKind,
    pub key: String,
}

impl Vertex {
    pub fn article(key: impl Into<String>) -> Vertex {
        Vertex { kind: VertexKind::Article, key: key.into() }
    }

    pub fn entity(key: impl Into<String>) -> Vertex {
        Vertex { kind: VertexKind::Entity, key: key.into() }
    }

    pub fn stock(key: impl Into<String>) -> Vertex {
        Vertex { kind: VertexKind::Stock, key: key.into() }
    }
}

/// Directed impact edge stamped with the day the impact was generated.
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct ImpactEdge {
    pub from: Vertex,
    pub to: Vertex,
    pub day: NaiveDate,
}

/// Directed multigraph of impacts. The same endpoint pair may carry edges from
/// several days; a given `(from, to, day)` triple appears at most once.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpactGraph {
    vertices: BTreeSet<Vertex>,
    edges: BTreeSet<ImpactEdge>,
}

impl ImpactGraph {
    pub fn new() -> ImpactGraph {
        ImpactGraph::default()
    }

    /// Merge a vertex into the graph. Returns true when the vertex was new;
    /// an existing `(kind, key)` leaves the graph unchanged.
    pub fn insert_vertex(&mut self, v: Vertex) -> bool {
        self.vertices.insert(v)
    }

    /// Add an edge, inserting both endpoints if needed. Duplicate
    /// `(from, to, day)` triples are ignored (returns false). Self-loops are
    /// rejected.
    pub fn add_edge(&mut self, from: Vertex, to: Vertex, day: NaiveDate) -> Result<bool> {
        if from == to {
            return Err(Error::SelfLoop { key: from.key });
        }
        self.vertices.insert(from.clone());
        self.vertices.insert(to.clone());
        Ok(self.edges.insert(ImpactEdge { from, to, day }))
    }

    /// Union another graph into this one, merging vertices by `(kind, key)`.
    pub fn union_with(&mut self, other: &ImpactGraph) {
        self.vertices.extend(other.vertices.iter().cloned());
        self.edges.extend(other.edges.iter().cloned());
    }

    pub fn contains_vertex(&self, v: &Vertex) -> bool {
        self.vertices.contains(v)
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Vertex> {
        self.vertices.iter()
    }

    pub fn edges(&self) -> impl Iterator<Item = &ImpactEdge> {
        self.edges.iter()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices_of_kind(&self, kind: VertexKind) -> impl Iterator<Item = &Vertex> {
        self.vertices.iter().filter(move |v| v.kind == kind)
    }

    /// Number of incoming edges, counting parallel same-pair edges from
    /// different days separately.
    pub fn in_degree(&self, v: &Vertex) -> usize {
        self.edges.iter().filter(|e| &e.to == v).count()
    }

    pub fn out_degree(&self, v: &Vertex) -> usize {
        self.edges.iter().filter(|e| &e.from == v).count()
    }

    /// Successor map with per-pair day lists, sorted and deterministic.
    pub fn adjacency(&self) -> BTreeMap<&Vertex, BTreeMap<&Vertex, Vec<NaiveDate>>> {
        let mut adj: BTreeMap<&Vertex, BTreeMap<&Vertex, Vec<NaiveDate>>> = BTreeMap::new();
        for edge in &self.edges {
            adj.entry(&edge.from)
                .or_default()
                .entry(&edge.to)
                .or_default()
                .push(edge.day);
        }
        adj
    }

    pub fn validate(&self) -> Result<()> {
        for edge in &self.edges {
            if edge.from == edge.to {
                return Err(Error::SelfLoop { key: edge.from.key.clone() });
            }
            if !self.vertices.contains(&edge.from) || !self.vertices.contains(&edge.to) {
                return Err(Error::Data(format!(
                    "edge {:?} -> {:?} references a missing vertex",
                    edge.from.key, edge.to.key
                )));
            }
        }
        Ok(())
    }
}

/// One article-to-stock impact path with the day of each hop. Paths stored in
/// memory may instead end at a dead-end entity (see `check_partial`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpactChain {
    pub path: Vec<Vertex>,
    pub edge_days: Vec<NaiveDate>,
}

impl ImpactChain {
    pub fn new(path: Vec<Vertex>, edge_days: Vec<NaiveDate>) -> ImpactChain {
        ImpactChain { path, edge_days }
    }

    fn check_shape(&self) -> Result<()> {
        if self.path.len() < 2 {
            return Err(Error::Data("chain must span at least one edge".into()));
        }
        if self.edge_days.len() != self.path.len() - 1 {
            return Err(Error::Data("chain needs one day per hop".into()));
        }
        if self.path[0].kind != VertexKind::Article {
            return Err(Error::Data("chain must start at an article".into()));
        }
        let distinct: BTreeSet<&Vertex> = self.path.iter().collect();
        if distinct.len() != self.path.len() {
            return Err(Error::Data("chain revisits a vertex".into()));
        }
        Ok(())
    }

    /// A complete chain ends at a stock vertex.
    pub fn check_complete(&self) -> Result<()> {
        self.check_shape()?;
        if self.path.last().map(|v| v.kind) != Some(VertexKind::Stock) {
            return Err(Error::Data("chain must end at a stock".into()));
        }
        Ok(())
    }

    /// A partial chain (kept by the memory module) may end at an entity that
    /// never reached a stock.
    pub fn check_partial(&self) -> Result<()> {
        self.check_shape()
    }

    /// Normalized entity keys appearing anywhere on the path.
    pub fn entity_keys(&self) -> impl Iterator<Item = &str> {
        self.path
            .iter()
            .filter(|v| v.kind == VertexKind::Entity)
            .map(|v| v.key.as_str())
    }

    pub fn contains_entity(&self, key: &str) -> bool {
        self.entity_keys().any(|k| k == key)
    }

    fn sort_key(&self) -> (Vec<(&str, VertexKind)>, &[NaiveDate]) {
        (
            self.path.iter().map(|v| (v.key.as_str(), v.kind)).collect(),
            &self.edge_days,
        )
    }
}

/// Relational tuple `(t, subject, impacts, object)` fed to the reasoning
/// prompt. The relation token is always `"impacts"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationalTuple {
    pub t: NaiveDate,
    pub subject: String,
    pub relation: String,
    pub object: String,
}

pub const IMPACT_RELATION: &str = "impacts";

impl RelationalTuple {
    pub fn new(t: NaiveDate, subject: impl Into<String>, object: impl Into<String>) -> Self {
        RelationalTuple {
            t,
            subject: subject.into(),
            relation: IMPACT_RELATION.to_string(),
            object: object.into(),
        }
    }

    pub fn render(&self) -> String {
        format!("({}, {}, {}, {})", self.t, self.subject, self.relation, self.object)
    }
}

/// Canonicalize an entity surface form: trim, strip surrounding punctuation,
/// collapse runs of whitespace, lowercase. Idempotent. Rejects strings that
/// normalize to nothing.
pub fn normalize_entity(raw: &str) -> Result<String> {
    let stripped = raw.trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation());
    let collapsed = stripped
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    if collapsed.is_empty() {
        return Err(Error::EmptyEntity { raw: raw.to_string() });
    }
    Ok(collapsed)
}

/// Simple vertex paths from any article vertex to any vertex in `targets`.
/// Paths may pass through a target and continue when it has outgoing edges.
fn vertex_paths_to(graph: &ImpactGraph, targets: &BTreeSet<&Vertex>) -> Vec<Vec<Vertex>> {
    let adj = graph.adjacency();
    let sources: Vec<&Vertex> = graph.vertices_of_kind(VertexKind::Article).collect();

    let per_source = par::map_slice(&sources, |source| {
        let mut found = Vec::new();
        let mut path = vec![(*source).clone()];
        let mut on_path: BTreeSet<&Vertex> = BTreeSet::new();
        on_path.insert(source);
        walk(&adj, targets, source, &mut path, &mut on_path, &mut found);
        found
    });
    per_source.into_iter().flatten().collect()
}

fn walk<'g>(
    adj: &BTreeMap<&'g Vertex, BTreeMap<&'g Vertex, Vec<NaiveDate>>>,
    targets: &BTreeSet<&Vertex>,
    current: &'g Vertex,
    path: &mut Vec<Vertex>,
    on_path: &mut BTreeSet<&'g Vertex>,
    out: &mut Vec<Vec<Vertex>>,
) {
    if path.len() >= 2 && targets.contains(current) {
        out.push(path.clone());
    }
    if let Some(successors) = adj.get(current) {
        for succ in successors.keys() {
            if on_path.contains(*succ) {
                continue;
            }
            path.push((*succ).clone());
            on_path.insert(succ);
            walk(adj, targets, succ, path, on_path, out);
            on_path.remove(succ);
            path.pop();
        }
    }
}

/// Maximal simple paths starting at article vertices: extended until no
/// unvisited successor remains. Used by the memory module to persist partial
/// chains alongside complete ones.
pub(crate) fn maximal_article_paths(graph: &ImpactGraph) -> Vec<Vec<Vertex>> {
    let adj = graph.adjacency();
    let sources: Vec<&Vertex> = graph.vertices_of_kind(VertexKind::Article).collect();
    let mut out = Vec::new();
    for source in sources {
        let mut path = vec![source.clone()];
        let mut on_path: BTreeSet<&Vertex> = BTreeSet::new();
        on_path.insert(source);
        walk_maximal(&adj, source, &mut path, &mut on_path, &mut out);
    }
    out
}

fn walk_maximal<'g>(
    adj: &BTreeMap<&'g Vertex, BTreeMap<&'g Vertex, Vec<NaiveDate>>>,
    current: &'g Vertex,
    path: &mut Vec<Vertex>,
    on_path: &mut BTreeSet<&'g Vertex>,
    out: &mut Vec<Vec<Vertex>>,
) {
    let mut extended = false;
    if let Some(successors) = adj.get(current) {
        for succ in successors.keys() {
            if on_path.contains(*succ) {
                continue;
            }
            extended = true;
            path.push((*succ).clone());
            on_path.insert(succ);
            walk_maximal(adj, succ, path, on_path, out);
            on_path.remove(succ);
            path.pop();
        }
    }
    if !extended && path.len() >= 2 {
        out.push(path.clone());
    }
}

/// Expand a vertex path into chains, one per combination of per-hop edge days.
/// On single-day graphs this yields exactly one chain per path; on merged
/// multi-day graphs parallel same-pair edges multiply out so that no dated
/// edge is lost when chains are turned back into a sub-graph.
pub(crate) fn expand_path_days(graph: &ImpactGraph, path: &[Vertex]) -> Vec<ImpactChain> {
    let adj = graph.adjacency();
    let mut hop_days: Vec<&Vec<NaiveDate>> = Vec::with_capacity(path.len() - 1);
    for hop in path.windows(2) {
        match adj.get(&hop[0]).and_then(|succ| succ.get(&hop[1])) {
            Some(days) if !days.is_empty() => hop_days.push(days),
            _ => return Vec::new(),
        }
    }
    let mut combos = vec![Vec::new()];
    for days in hop_days {
        let mut next = Vec::with_capacity(combos.len() * days.len());
        for combo in &combos {
            for day in days {
                let mut extended: Vec<NaiveDate> = combo.clone();
                extended.push(*day);
                next.push(extended);
            }
        }
        combos = next;
    }
    combos
        .into_iter()
        .map(|days| ImpactChain::new(path.to_vec(), days))
        .collect()
}

/// Every simple path from an article vertex to a portfolio stock vertex, in a
/// deterministic lexicographic order.
pub fn enumerate_chains(graph: &ImpactGraph, portfolio: &Portfolio) -> Vec<ImpactChain> {
    let tickers: BTreeSet<&str> = portfolio.members.iter().map(|s| s.ticker.as_str()).collect();
    let targets: BTreeSet<&Vertex> = graph
        .vertices_of_kind(VertexKind::Stock)
        .filter(|v| tickers.contains(v.key.as_str()))
        .collect();
    let mut chains: Vec<ImpactChain> = vertex_paths_to(graph, &targets)
        .iter()
        .flat_map(|path| expand_path_days(graph, path))
        .collect();
    chains.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    chains
}

/// Vertex paths from articles to all stock vertices present in the graph,
/// without expanding parallel days. Shared by memory storage and attention
/// filtering, which both operate on whole paths.
pub(crate) fn stock_vertex_paths(graph: &ImpactGraph) -> Vec<Vec<Vertex>> {
    let targets: BTreeSet<&Vertex> = graph.vertices_of_kind(VertexKind::Stock).collect();
    vertex_paths_to(graph, &targets)
}

/// Union of all vertices and dated edges appearing on the given chains.
pub fn chains_to_subgraph(chains: &[ImpactChain]) -> ImpactGraph {
    let mut graph = ImpactGraph::new();
    for chain in chains {
        for vertex in &chain.path {
            graph.insert_vertex(vertex.clone());
        }
        for (hop, day) in chain.path.windows(2).zip(&chain.edge_days) {
            graph
                .add_edge(hop[0].clone(), hop[1].clone(), *day)
                .expect("chain hops are never self-loops");
        }
    }
    graph
}

/// Breadth-first distance of every vertex from the nearest article vertex.
/// Unreachable vertices are absent from the map.
pub fn article_levels(graph: &ImpactGraph) -> BTreeMap<&Vertex, usize> {
    let adj = graph.adjacency();
    let mut level: BTreeMap<&Vertex, usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    for v in graph.vertices_of_kind(VertexKind::Article) {
        level.insert(v, 0);
        queue.push_back(v);
    }
    while let Some(v) = queue.pop_front() {
        let next = level[v] + 1;
        if let Some(successors) = adj.get(v) {
            for succ in successors.keys() {
                if !level.contains_key(*succ) {
                    level.insert(succ, next);
                    queue.push_back(succ);
                }
            }
        }
    }
    level
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{PortfolioMode, Stock};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn day(n: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2007, 6, n).unwrap()
    }

    fn portfolio(tickers: &[&str]) -> Portfolio {
        Portfolio {
            name: "test".into(),
            mode: PortfolioMode::Stock,
            members: tickers
                .iter()
                .map(|t| Stock {
                    ticker: t.to_string(),
                    name: format!("{t} Corp"),
                    category: "test".into(),
                    aliases: vec![],
                })
                .collect(),
        }
    }

    #[test]
    fn normalize_trims_and_lowercases() {
        assert_eq!(normalize_entity("  U.S. Housing Market ").unwrap(), "u.s. housing market");
    }

    #[test]
    fn normalize_is_identity_on_canonical_input() {
        assert_eq!(normalize_entity("mortgage industry").unwrap(), "mortgage industry");
    }

    #[test]
    fn normalize_collapses_whitespace_and_strips_punctuation() {
        // Hand-applied rules: strip trailing period, collapse the double
        // space, lowercase. Both forms must merge to the same key.
        let a = normalize_entity("Mortgage   Industry.").unwrap();
        let b = normalize_entity("mortgage industry").unwrap();
        assert_eq!(a, "mortgage industry");
        assert_eq!(a, b);
    }

    #[test]
    fn normalize_rejects_empty_results() {
        assert!(normalize_entity("   ").is_err());
        assert!(normalize_entity("...").is_err());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(raw in "[ -~]{1,40}") {
            if let Ok(once) = normalize_entity(&raw) {
                let twice = normalize_entity(&once).unwrap();
                prop_assert_eq!(once, twice);
            }
        }
    }

    #[test]
    fn insert_vertex_merges_duplicates() {
        let mut g = ImpactGraph::new();
        assert!(g.insert_vertex(Vertex::entity("mortgage industry")));
        assert!(!g.insert_vertex(Vertex::entity("mortgage industry")));
        assert_eq!(g.vertex_count(), 1);
    }

    #[test]
    fn insert_vertex_merges_after_normalization() {
        let mut g = ImpactGraph::new();
        let a = normalize_entity("mortgage industry").unwrap();
        let b = normalize_entity("Mortgage Industry").unwrap();
        g.insert_vertex(Vertex::entity(a));
        g.insert_vertex(Vertex::entity(b));
        assert_eq!(g.vertex_count(), 1);
    }

    #[test]
    fn entity_and_stock_with_same_key_stay_distinct() {
        let mut g = ImpactGraph::new();
        g.insert_vertex(Vertex::entity("aapl"));
        g.insert_vertex(Vertex::stock("aapl"));
        assert_eq!(g.vertex_count(), 2);
        let kinds: Vec<VertexKind> = g.vertices().map(|v| v.kind).collect();
        assert_eq!(kinds, vec![VertexKind::Entity, VertexKind::Stock]);
    }

    #[test]
    fn add_edge_rejects_self_loops() {
        let mut g = ImpactGraph::new();
        let v = Vertex::entity("x");
        assert!(g.add_edge(v.clone(), v, day(1)).is_err());
    }

    #[test]
    fn single_path_enumerates_one_chain() {
        let mut g = ImpactGraph::new();
        g.add_edge(Vertex::article("x1"), Vertex::entity("e1"), day(1)).unwrap();
        g.add_edge(Vertex::entity("e1"), Vertex::stock("S1"), day(1)).unwrap();
        let chains = enumerate_chains(&g, &portfolio(&["S1"]));
        assert_eq!(chains.len(), 1);
        assert_eq!(
            chains[0].path,
            vec![Vertex::article("x1"), Vertex::entity("e1"), Vertex::stock("S1")]
        );
        assert_eq!(chains[0].edge_days, vec![day(1), day(1)]);
        chains[0].check_complete().unwrap();
    }

    #[test]
    fn disjoint_middles_enumerate_two_chains() {
        let mut g = ImpactGraph::new();
        g.add_edge(Vertex::article("x1"), Vertex::entity("e1"), day(1)).unwrap();
        g.add_edge(Vertex::entity("e1"), Vertex::stock("S1"), day(1)).unwrap();
        g.add_edge(Vertex::article("x1"), Vertex::entity("e2"), day(1)).unwrap();
        g.add_edge(Vertex::entity("e2"), Vertex::stock("S1"), day(1)).unwrap();
        let chains = enumerate_chains(&g, &portfolio(&["S1"]));
        assert_eq!(chains.len(), 2);
    }

    #[test]
    fn cycles_are_broken_by_simple_path_rule() {
        let mut g = ImpactGraph::new();
        g.add_edge(Vertex::article("x1"), Vertex::entity("e1"), day(1)).unwrap();
        g.add_edge(Vertex::entity("e1"), Vertex::entity("e2"), day(1)).unwrap();
        g.add_edge(Vertex::entity("e2"), Vertex::entity("e1"), day(1)).unwrap();
        g.add_edge(Vertex::entity("e2"), Vertex::stock("S1"), day(1)).unwrap();
        let chains = enumerate_chains(&g, &portfolio(&["S1"]));
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].path.len(), 4); // x1, e1, e2, S1 — no revisit of e1
        for chain in &chains {
            chain.check_complete().unwrap();
        }
    }

    #[test]
    fn parallel_day_edges_multiply_into_distinct_chains() {
        let mut g = ImpactGraph::new();
        g.add_edge(Vertex::article("x1"), Vertex::entity("e1"), day(1)).unwrap();
        g.add_edge(Vertex::article("x1"), Vertex::entity("e1"), day(3)).unwrap();
        g.add_edge(Vertex::entity("e1"), Vertex::stock("S1"), day(3)).unwrap();
        let chains = enumerate_chains(&g, &portfolio(&["S1"]));
        assert_eq!(chains.len(), 2);
        assert_eq!(chains[0].edge_days, vec![day(1), day(3)]);
        assert_eq!(chains[1].edge_days, vec![day(3), day(3)]);
    }

    #[test]
    fn subgraph_of_one_chain_has_three_vertices_two_edges() {
        let chain = ImpactChain::new(
            vec![Vertex::article("x1"), Vertex::entity("e1"), Vertex::stock("S1")],
            vec![day(1), day(1)],
        );
        let g = chains_to_subgraph(&[chain]);
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn subgraph_merges_shared_vertices() {
        let c1 = ImpactChain::new(
            vec![Vertex::article("x1"), Vertex::entity("e1"), Vertex::stock("S1")],
            vec![day(1), day(1)],
        );
        let c2 = ImpactChain::new(
            vec![Vertex::article("x2"), Vertex::entity("e1"), Vertex::stock("S1")],
            vec![day(1), day(1)],
        );
        let g = chains_to_subgraph(&[c1, c2]);
        assert_eq!(g.vertex_count(), 4); // x1, x2, e1, S1
        assert_eq!(g.edge_count(), 3); // the shared e1 -> S1 hop merges
    }

    // Independent route for the enumeration contract: iterate over vertex
    // index sequences with a visited bitmask rather than walking adjacency
    // sets, then expand day combinations with plain nested loops.
    pub(crate) fn brute_force_chains(
        graph: &ImpactGraph,
        portfolio: &Portfolio,
    ) -> Vec<ImpactChain> {
        let verts: Vec<&Vertex> = graph.vertices().collect();
        let index_of = |v: &Vertex| verts.iter().position(|u| *u == v).unwrap();
        let tickers: BTreeSet<&str> =
            portfolio.members.iter().map(|s| s.ticker.as_str()).collect();
        let mut day_table: BTreeMap<(usize, usize), Vec<NaiveDate>> = BTreeMap::new();
        for e in graph.edges() {
            day_table
                .entry((index_of(&e.from), index_of(&e.to)))
                .or_default()
                .push(e.day);
        }
        for days in day_table.values_mut() {
            days.sort();
        }

        let mut paths: Vec<Vec<usize>> = Vec::new();
        let mut frontier: Vec<(Vec<usize>, u32)> = verts
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VertexKind::Article)
            .map(|(i, _)| (vec![i], 1u32 << i))
            .collect();
        while let Some((path, mask)) = frontier.pop() {
            let last = *path.last().unwrap();
            if path.len() >= 2
                && verts[last].kind == VertexKind::Stock
                && tickers.contains(verts[last].key.as_str())
            {
                paths.push(path.clone());
            }
            for next in 0..verts.len() {
                if mask & (1 << next) != 0 {
                    continue;
                }
                if day_table.contains_key(&(last, next)) {
                    let mut longer = path.clone();
                    longer.push(next);
                    frontier.push((longer, mask | (1 << next)));
                }
            }
        }

        let mut chains = Vec::new();
        for path in paths {
            let mut day_choices: Vec<Vec<NaiveDate>> = vec![Vec::new()];
            for pair in path.windows(2) {
                let days = &day_table[&(pair[0], pair[1])];
                let mut grown = Vec::new();
                for prefix in &day_choices {
                    for d in days {
                        let mut c = prefix.clone();
                        c.push(*d);
                        grown.push(c);
                    }
                }
                day_choices = grown;
            }
            let vertex_path: Vec<Vertex> = path.iter().map(|&i| verts[i].clone()).collect();
            for days in day_choices {
                chains.push(ImpactChain::new(vertex_path.clone(), days));
            }
        }
        chains.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        chains
    }

    fn random_graph(seed: u64, max_vertices: usize) -> (ImpactGraph, Portfolio) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n_articles = rng.random_range(1..=2);
        let n_entities = rng.random_range(1..=max_vertices.saturating_sub(3).max(1));
        let n_stocks = rng.random_range(1..=2);
        let mut g = ImpactGraph::new();
        let mut verts = Vec::new();
        for i in 0..n_articles {
            verts.push(Vertex::article(format!("x{i}")));
        }
        for i in 0..n_entities {
            verts.push(Vertex::entity(format!("e{i}")));
        }
        for i in 0..n_stocks {
            verts.push(Vertex::stock(format!("S{i}")));
        }
        for v in &verts {
            g.insert_vertex(v.clone());
        }
        let edge_attempts = rng.random_range(0..=(verts.len() * 2));
        for _ in 0..edge_attempts {
            let a = rng.random_range(0..verts.len());
            let b = rng.random_range(0..verts.len());
            if a == b {
                continue;
            }
            let d = day(rng.random_range(1..=4));
            let _ = g.add_edge(verts[a].clone(), verts[b].clone(), d);
        }
        let tickers: Vec<String> = (0..n_stocks).map(|i| format!("S{i}")).collect();
        let p = portfolio(&tickers.iter().map(|s| s.as_str()).collect::<Vec<_>>());
        (g, p)
    }

    #[test]
    fn enumeration_matches_bitmask_oracle_on_random_graphs() {
        for seed in 0..300 {
            let (g, p) = random_graph(seed, 8);
            let got = enumerate_chains(&g, &p);
            let want = brute_force_chains(&g, &p);
            assert_eq!(got, want, "seed {seed}");
        }
    }

    #[test]
    fn subgraph_of_all_chains_is_within_reachable_restriction() {
        // BFS oracle: everything in the subgraph must be reachable from an
        // article and able to reach a stock.
        for seed in 0..100 {
            let (g, p) = random_graph(seed, 8);
            let chains = enumerate_chains(&g, &p);
            let sub = chains_to_subgraph(&chains);
            let forward = article_levels(&g);
            // reverse reachability to any portfolio stock
            let mut reverse: BTreeSet<&Vertex> = g
                .vertices_of_kind(VertexKind::Stock)
                .filter(|v| p.members.iter().any(|m| m.ticker == v.key))
                .collect();
            loop {
                let before = reverse.len();
                for e in g.edges() {
                    if reverse.contains(&e.to) {
                        reverse.insert(&e.from);
                    }
                }
                if reverse.len() == before {
                    break;
                }
            }
            for v in sub.vertices() {
                assert!(forward.contains_key(v), "seed {seed}: {v:?} unreachable from articles");
                assert!(reverse.contains(v), "seed {seed}: {v:?} cannot reach a stock");
            }
        }
    }

    proptest! {
        // Invariants hold after arbitrary interleavings of inserts and edges.
        #[test]
        fn graph_invariants_hold_under_random_op_sequences(
            ops in prop::collection::vec((0u8..3, 0usize..6, 0usize..6, 1u32..5), 0..40)
        ) {
            let names = ["x0", "e0", "e1", "e2", "S0", "S1"];
            let make = |i: usize| -> Vertex {
                match i {
                    0 => Vertex::article(names[i]),
                    4 | 5 => Vertex::stock(names[i]),
                    _ => Vertex::entity(names[i]),
                }
            };
            let mut g = ImpactGraph::new();
            let mut other = ImpactGraph::new();
            for (op, a, b, d) in ops {
                match op {
                    0 => { g.insert_vertex(make(a)); }
                    1 => { let _ = g.add_edge(make(a), make(b), day(d)); }
                    _ => {
                        let _ = other.add_edge(make(a), make(b), day(d));
                        g.union_with(&other);
                    }
                }
                prop_assert!(g.validate().is_ok());
            }
        }
    }

    #[test]
    fn article_levels_are_shortest_distances() {
        let mut g = ImpactGraph::new();
        g.add_edge(Vertex::article("x1"), Vertex::entity("e1"), day(1)).unwrap();
        g.add_edge(Vertex::entity("e1"), Vertex::entity("e2"), day(1)).unwrap();
        g.add_edge(Vertex::article("x2"), Vertex::entity("e2"), day(1)).unwrap();
        let levels = article_levels(&g);
        assert_eq!(levels[&Vertex::entity("e1")], 1);
        assert_eq!(levels[&Vertex::entity("e2")], 1); // direct from x2, not 2 via e1
    }
}
