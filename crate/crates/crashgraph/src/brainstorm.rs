//! Iterative expansion of one day's articles into the daily impact graph.
//!
//! Each iteration prompts the backend once per frontier vertex; returned
//! entities are normalized, merged into the graph, and — unless they match a
//! portfolio member — queued for the next iteration. A merged entity is
//! expanded at most once per day regardless of how many parents reached it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::domain::{NewsArticle, Portfolio, Stock};
use crate::error::{Error, Result};
use crate::graph::{normalize_entity, ImpactGraph, Vertex, VertexKind};
use crate::llm::{build_brainstorm_prompt, parse_brainstorm, request_digest, ChatBackend};
use crate::par;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionConfig {
    /// Entities requested per expansion.
    pub k: usize,
    /// Maximum expansion iterations per day.
    pub max_iterations: usize,
    /// Article bodies are truncated to this many characters in prompts.
    pub body_char_cap: usize,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        // k=3 with four iterations lets a chain span
        // article -> entity -> entity -> entity -> stock.
        ExpansionConfig { k: 3, max_iterations: 4, body_char_cap: 2000 }
    }
}

/// One recorded prompt/response exchange, surfaced so the runner can append
/// it to the per-day transcript log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Exchange {
    pub phase: String,
    pub subject: String,
    /// Repeat index for reasoning calls; brainstorm calls have none.
    pub repeat: Option<usize>,
    pub prompt_digest: String,
    pub response: String,
}

#[derive(Debug, Default)]
pub struct DayExpansion {
    pub graph: ImpactGraph,
    pub exchanges: Vec<Exchange>,
    /// Frontier vertices whose replies could not be parsed (they contribute
    /// no children).
    pub parse_failures: Vec<String>,
}

/// Match an entity key against the portfolio: normalized ticker, normalized
/// display name, then configured aliases, first member in portfolio order
/// wins. The key is re-normalized on the way in, which is a no-op for keys
/// that already came out of `normalize_entity`.
pub fn stock_alias_match<'p>(entity_key: &str, portfolio: &'p Portfolio) -> Option<&'p Stock> {
    let entity_key = normalize_entity(entity_key).ok()?;
    portfolio.members.iter().find(|member| {
        let forms = std::iter::once(member.ticker.as_str())
            .chain(std::iter::once(member.name.as_str()))
            .chain(member.aliases.iter().map(|a| a.as_str()));
        for form in forms {
            if let Ok(normalized) = normalize_entity(form) {
                if normalized == entity_key {
                    return true;
                }
            }
        }
        false
    })
}

/// Expand one day's articles into an impact graph. All articles must share a
/// single calendar day. Backend transport failures abort the day; per-vertex
/// parse failures are recorded and skipped.
pub fn expand_day(
    articles: &[NewsArticle],
    portfolio: &Portfolio,
    cfg: &ExpansionConfig,
    backend: &dyn ChatBackend,
) -> Result<DayExpansion> {
    let day = match articles.first() {
        Some(a) => a.date,
        None => return Ok(DayExpansion::default()),
    };
    if articles.iter().any(|a| a.date != day) {
        return Err(Error::Data("expand_day requires articles from a single day".into()));
    }

    let mut out = DayExpansion::default();
    let mut provenance: BTreeMap<Vertex, String> = BTreeMap::new();
    let mut expanded: BTreeSet<Vertex> = BTreeSet::new();

    let mut frontier: Vec<Vertex> = Vec::new();
    for article in articles {
        let vertex = Vertex::article(&article.id);
        out.graph.insert_vertex(vertex.clone());
        provenance.insert(vertex.clone(), article_text(article, cfg.body_char_cap));
        frontier.push(vertex);
    }
    frontier.sort();
    frontier.dedup();

    for _ in 0..cfg.max_iterations {
        if frontier.is_empty() {
            break;
        }
        // Fan the backend calls out over the frontier; results come back in
        // frontier order so the merge below stays deterministic.
        let replies = par::map_slice(&frontier, |vertex| {
            let source_text = provenance.get(vertex).cloned().unwrap_or_default();
            let request = build_brainstorm_prompt(vertex, &source_text, portfolio, cfg.k);
            let digest = request_digest(&request);
            (vertex.clone(), digest, backend.complete(&request))
        });

        let mut next_frontier: Vec<Vertex> = Vec::new();
        for (vertex, digest, response) in replies {
            let raw = match response {
                Ok(raw) => raw,
                Err(e @ Error::FixtureMiss { .. }) => return Err(e),
                Err(Error::Parse { .. }) => unreachable!("backends do not parse"),
                Err(e) => return Err(e),
            };
            out.exchanges.push(Exchange {
                phase: "brainstorm".to_string(),
                subject: vertex.key.clone(),
                repeat: None,
                prompt_digest: digest,
                response: raw.clone(),
            });
            let reply = match parse_brainstorm(&raw, cfg.k) {
                Ok(reply) => reply,
                Err(_) => {
                    log::debug!("unparseable brainstorm reply for {:?}", vertex.key);
                    out.parse_failures.push(vertex.key.clone());
                    continue;
                }
            };
            for item in reply.items {
                let child = match stock_alias_match(&item.entity, portfolio) {
                    Some(stock) => Vertex::stock(&stock.ticker),
                    None => Vertex::entity(&item.entity),
                };
                if child == vertex {
                    continue; // an entity naming itself adds nothing
                }
                let is_new = !out.graph.contains_vertex(&child);
                out.graph.add_edge(vertex.clone(), child.clone(), day)?;
                if is_new && child.kind == VertexKind::Entity && !expanded.contains(&child) {
                    provenance.insert(
                        child.clone(),
                        format!(
                            "{} -> {}",
                            provenance.get(&vertex).map(String::as_str).unwrap_or(&vertex.key),
                            child.key
                        ),
                    );
                    next_frontier.push(child);
                }
            }
            expanded.insert(vertex);
        }
        next_frontier.sort();
        next_frontier.dedup();
        frontier = next_frontier;
    }

    Ok(out)
}

fn article_text(article: &NewsArticle, body_char_cap: usize) -> String {
    let mut body: String = article.body.chars().take(body_char_cap).collect();
    if body.is_empty() {
        body.push_str("(no body)");
    }
    format!("Headline: {}\nBody: {}", article.headline, body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::PortfolioMode;
    use crate::llm::MockBackend;
    use chrono::NaiveDate;

    fn day() -> NaiveDate {
        NaiveDate::from_ymd_opt(2007, 6, 4).unwrap()
    }

    fn portfolio() -> Portfolio {
        Portfolio {
            name: "p".into(),
            mode: PortfolioMode::Stock,
            members: vec![
                Stock {
                    ticker: "AAPL".into(),
                    name: "Apple Inc.".into(),
                    category: "U.S.".into(),
                    aliases: vec!["apple".into()],
                },
                Stock {
                    ticker: "TM".into(),
                    name: "Toyota Motor Corporation".into(),
                    category: "Japan".into(),
                    aliases: vec!["toyota".into()],
                },
            ],
        }
    }

    fn article(id: &str, headline: &str) -> NewsArticle {
        NewsArticle { id: id.into(), date: day(), headline: headline.into(), body: String::new() }
    }

    #[test]
    fn alias_match_covers_name_ticker_and_alias() {
        let p = portfolio();
        assert_eq!(stock_alias_match("apple inc.", &p).unwrap().ticker, "AAPL");
        assert_eq!(stock_alias_match("toyota", &p).unwrap().ticker, "TM");
        assert_eq!(stock_alias_match("aapl", &p).unwrap().ticker, "AAPL");
        assert!(stock_alias_match("mortgage industry", &p).is_none());
    }

    #[test]
    fn chain_reaches_stock_within_iteration_budget() {
        let mock = MockBackend::new()
            .rule("lender halts", &[("mortgage industry", "exposed")])
            .rule("mortgage industry", &[("apple", "consumer demand")]);
        let articles = [article("x1", "Big lender halts operations")];
        let cfg = ExpansionConfig { k: 3, max_iterations: 4, body_char_cap: 100 };
        let result = expand_day(&articles, &portfolio(), &cfg, &mock).unwrap();
        assert_eq!(result.graph.vertex_count(), 3);
        assert_eq!(result.graph.edge_count(), 2);
        assert!(result.graph.contains_vertex(&Vertex::stock("AAPL")));
    }

    #[test]
    fn iteration_cap_stops_expansion_early() {
        let mock = MockBackend::new()
            .rule("lender halts", &[("mortgage industry", "exposed")])
            .rule("mortgage industry", &[("apple", "consumer demand")]);
        let articles = [article("x1", "Big lender halts operations")];
        let cfg = ExpansionConfig { k: 3, max_iterations: 1, body_char_cap: 100 };
        let result = expand_day(&articles, &portfolio(), &cfg, &mock).unwrap();
        assert_eq!(result.graph.vertex_count(), 2); // x1 and the entity, no stock
        assert!(!result.graph.contains_vertex(&Vertex::stock("AAPL")));
    }

    #[test]
    fn repeated_entities_merge_into_one_vertex() {
        let mock = MockBackend::new()
            .rule("lender halts", &[("mortgage industry", "exposed")])
            .rule("defaults rise", &[("Mortgage   Industry.", "more pressure")])
            .rule("mortgage industry", &[("apple", "consumer demand")]);
        let articles = [
            article("x1", "Big lender halts operations"),
            article("x2", "Subprime defaults rise again"),
        ];
        let cfg = ExpansionConfig::default();
        let result = expand_day(&articles, &portfolio(), &cfg, &mock).unwrap();
        let entity = Vertex::entity("mortgage industry");
        assert!(result.graph.contains_vertex(&entity));
        assert_eq!(
            result.graph.vertices_of_kind(VertexKind::Entity).count(),
            1,
            "both surface forms must merge"
        );
        assert_eq!(result.graph.in_degree(&entity), 2);
    }

    #[test]
    fn merged_entity_is_expanded_once_per_day() {
        let mock = MockBackend::new()
            .rule("lender halts", &[("mortgage industry", "exposed")])
            .rule("defaults rise", &[("mortgage industry", "more pressure")])
            .rule("mortgage industry", &[("apple", "consumer demand")]);
        let articles = [
            article("x1", "Big lender halts operations"),
            article("x2", "Subprime defaults rise again"),
        ];
        let result = expand_day(&articles, &portfolio(), &ExpansionConfig::default(), &mock)
            .unwrap();
        // 2 article expansions + 1 entity expansion; the stock is never expanded.
        assert_eq!(mock.call_count(), 3);
        assert!(result.graph.contains_vertex(&Vertex::stock("AAPL")));
    }

    #[test]
    fn stocks_have_no_outgoing_edges_and_depth_is_bounded() {
        let mock = MockBackend::new()
            .rule("lender halts", &[("e1", "")])
            .rule("e1", &[("e2", "")])
            .rule("e2", &[("e3", "")])
            .rule("e3", &[("e4", "")])
            .rule("e4", &[("e5", "")]);
        let articles = [article("x1", "Big lender halts operations")];
        let cfg = ExpansionConfig { k: 1, max_iterations: 4, body_char_cap: 100 };
        let result = expand_day(&articles, &portfolio(), &cfg, &mock).unwrap();
        for stock in result.graph.vertices_of_kind(VertexKind::Stock) {
            assert_eq!(result.graph.out_degree(stock), 0);
        }
        let levels = crate::graph::article_levels(&result.graph);
        let deepest = levels.values().max().copied().unwrap_or(0);
        assert!(deepest <= cfg.max_iterations, "depth {deepest} exceeds iteration cap");
        // Every non-article vertex is reachable from an article.
        assert_eq!(levels.len(), result.graph.vertex_count());
    }

    #[test]
    fn unparseable_reply_skips_vertex_but_expansion_continues() {
        let mock = MockBackend::new()
            .rule("lender halts", &[("mortgage industry", ""), ("hedge funds", "")]);
        // "hedge funds" has no rule -> mock answers prose -> parse failure.
        let articles = [article("x1", "Big lender halts operations")];
        let result = expand_day(&articles, &portfolio(), &ExpansionConfig::default(), &mock)
            .unwrap();
        assert!(result.parse_failures.contains(&"hedge funds".to_string()));
        assert!(result.graph.contains_vertex(&Vertex::entity("hedge funds")));
    }

    #[test]
    fn expansion_is_a_pure_function_of_its_inputs() {
        let build = || {
            let mock = MockBackend::new()
                .rule("lender halts", &[("mortgage industry", "exposed")])
                .rule("mortgage industry", &[("apple", "consumer demand")]);
            let articles = [article("x1", "Big lender halts operations")];
            expand_day(&articles, &portfolio(), &ExpansionConfig::default(), &mock)
                .unwrap()
                .graph
        };
        assert_eq!(build(), build());
    }
}
