//! Per-entity archive of past impact chains with exponential retention decay.
//!
//! Retrieval unions stored chains that share an entity with the day's graph
//! into the temporal graph; storage happens once per day after prediction.
//! Nothing is evicted by age — decay downweights instead — but a per-entity
//! FIFO cap guards unbounded growth.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, ImpactChain, ImpactGraph, VertexKind};

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_PER_ENTITY_CAP: usize = 200;

/// How edge age is counted for decay.
#[derive(Debug, Clone)]
pub enum DayCount {
    /// Plain calendar-day difference.
    Calendar,
    /// Position difference within the sorted trading-day list (the corpus
    /// days), matching the one-step-per-pipeline-day reading of decay.
    Trading(Arc<Vec<NaiveDate>>),
}

impl DayCount {
    pub fn trading_days(days: impl IntoIterator<Item = NaiveDate>) -> DayCount {
        let mut list: Vec<NaiveDate> = days.into_iter().collect();
        list.sort();
        list.dedup();
        DayCount::Trading(Arc::new(list))
    }

    /// Age in steps from `from` to `to`. Zero when the days are equal.
    pub fn age(&self, from: NaiveDate, to: NaiveDate) -> Result<u64> {
        if from > to {
            return Err(Error::EdgeFromFuture { edge_day: from, today: to });
        }
        match self {
            DayCount::Calendar => Ok((to - from).num_days() as u64),
            DayCount::Trading(days) => {
                let after_from = days.partition_point(|d| *d <= from);
                let through_to = days.partition_point(|d| *d <= to);
                Ok((through_to - after_from) as u64)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecayConfig {
    /// Decay rate constant in days.
    pub lambda: f64,
    /// When false, retention is the constant 1 (the no-decay ablation).
    pub enabled: bool,
    pub day_count: DayCount,
}

impl DecayConfig {
    pub fn new(lambda: f64, day_count: DayCount) -> DecayConfig {
        DecayConfig { lambda, enabled: true, day_count }
    }

    pub fn disabled() -> DecayConfig {
        DecayConfig { lambda: 1.0, enabled: false, day_count: DayCount::Calendar }
    }
}

/// Retention weight exp(-age/lambda) of an edge generated on `edge_day`,
/// observed from `today`. Same-day impacts weigh exactly 1.
pub fn retention(cfg: &DecayConfig, edge_day: NaiveDate, today: NaiveDate) -> Result<f64> {
    let age = cfg.day_count.age(edge_day, today)?;
    if !cfg.enabled {
        return Ok(1.0);
    }
    Ok((-(age as f64) / cfg.lambda).exp())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MemoryBank {
    /// Canonical entity key -> chains mentioning that entity, oldest first.
    entries: BTreeMap<String, Vec<ImpactChain>>,
    current_day: Option<NaiveDate>,
    per_entity_cap: usize,
}

impl MemoryBank {
    pub fn new() -> MemoryBank {
        MemoryBank {
            entries: BTreeMap::new(),
            current_day: None,
            per_entity_cap: DEFAULT_PER_ENTITY_CAP,
        }
    }

    pub fn with_cap(per_entity_cap: usize) -> MemoryBank {
        MemoryBank { per_entity_cap, ..MemoryBank::new() }
    }

    pub fn current_day(&self) -> Option<NaiveDate> {
        self.current_day
    }

    pub fn entity_count(&self) -> usize {
        self.entries.len()
    }

    /// Total stored chain references across all entity keys.
    pub fn total_insertions(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn chains_for(&self, entity_key: &str) -> &[ImpactChain] {
        self.entries.get(entity_key).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Union all stored chains that mention an entity present in the daily
    /// graph into a copy of it, producing the temporal graph. Vertices merge
    /// by `(kind, key)`; stored edges keep their original days.
    pub fn retrieve(&self, daily_graph: &ImpactGraph) -> ImpactGraph {
        let mut temporal = daily_graph.clone();
        for vertex in daily_graph.vertices_of_kind(VertexKind::Entity) {
            for chain in self.chains_for(&vertex.key) {
                for v in &chain.path {
                    temporal.insert_vertex(v.clone());
                }
                for (hop, day) in chain.path.windows(2).zip(&chain.edge_days) {
                    temporal
                        .add_edge(hop[0].clone(), hop[1].clone(), *day)
                        .expect("stored chains contain no self-loops");
                }
            }
        }
        temporal
    }

    /// Record the day's chains: every article-to-stock chain plus maximal
    /// article-to-dead-end partial chains, appended under each entity key the
    /// chain passes through. Must be called exactly once per day in order.
    pub fn store(&mut self, day: NaiveDate, daily_graph: &ImpactGraph) -> Result<()> {
        if let Some(current) = self.current_day {
            if day == current {
                return Err(Error::MemoryStore(format!("day {day} already stored")));
            }
            if day < current {
                return Err(Error::MemoryStore(format!(
                    "day {day} precedes the last stored day {current}"
                )));
            }
        }

        let mut paths: BTreeSet<Vec<crate::graph::Vertex>> = BTreeSet::new();
        paths.extend(graph::stock_vertex_paths(daily_graph));
        paths.extend(graph::maximal_article_paths(daily_graph));

        for path in paths {
            for chain in graph::expand_path_days(daily_graph, &path) {
                if chain.edge_days.iter().any(|d| *d > day) {
                    return Err(Error::MemoryStore(format!(
                        "chain contains an edge dated after {day}"
                    )));
                }
                let keys: BTreeSet<&str> = chain.entity_keys().collect();
                for key in keys {
                    let slot = self.entries.entry(key.to_string()).or_default();
                    slot.push(chain.clone());
                    if slot.len() > self.per_entity_cap {
                        slot.remove(0);
                    }
                }
            }
        }
        self.current_day = Some(day);
        Ok(())
    }

    /// Write a versioned snapshot. `restore` of the result is lossless.
    pub fn snapshot(&self, path: &Path) -> Result<()> {
        let file = SnapshotFile {
            format_version: SNAPSHOT_FORMAT_VERSION,
            current_day: self.current_day,
            per_entity_cap: self.per_entity_cap,
            entries: self.entries.clone(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn restore(path: &Path) -> Result<MemoryBank> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::Snapshot(format!("{}: {e}", path.display())))?;
        let version = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Snapshot(format!("{}: missing format_version", path.display())))?;
        if version as u32 > SNAPSHOT_FORMAT_VERSION {
            return Err(Error::SnapshotVersion {
                found: version as u32,
                supported: SNAPSHOT_FORMAT_VERSION,
            });
        }
        let file: SnapshotFile = serde_json::from_value(value)
            .map_err(|e| Error::Snapshot(format!("{}: {e}", path.display())))?;
        Ok(MemoryBank {
            entries: file.entries,
            current_day: file.current_day,
            per_entity_cap: file.per_entity_cap,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SnapshotFile {
    format_version: u32,
    current_day: Option<NaiveDate>,
    per_entity_cap: usize,
    entries: BTreeMap<String, Vec<ImpactChain>>,
}
