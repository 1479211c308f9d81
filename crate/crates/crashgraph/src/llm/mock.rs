//! Rule-table chat backend. Deterministic stand-in used to drive tests and to
//! record the bundled scripted fixtures.
//!
//! Brainstorm prompts are answered by looking for a rule marker (an article
//! headline or entity name) inside the prompt text; reasoning and baseline
//! prompts are answered from per-day verdict/probability tables, with the day
//! taken from the latest ISO date mentioned in the prompt.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::llm::parse::{render_brainstorm, BrainstormItem, BrainstormReply};
use crate::llm::{ChatBackend, ChatRequest};

#[derive(Debug, Default)]
pub struct MockBackend {
    brainstorm_rules: BTreeMap<String, Vec<(String, String)>>,
    verdicts: BTreeMap<NaiveDate, bool>,
    probabilities: BTreeMap<NaiveDate, f64>,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new() -> MockBackend {
        MockBackend::default()
    }

    /// Answer brainstorm prompts containing `marker` with the given
    /// `(entity, explanation)` children.
    pub fn rule(mut self, marker: &str, children: &[(&str, &str)]) -> MockBackend {
        self.brainstorm_rules.insert(
            marker.to_string(),
            children.iter().map(|(e, x)| (e.to_string(), x.to_string())).collect(),
        );
        self
    }

    pub fn verdict(mut self, day: NaiveDate, crash: bool) -> MockBackend {
        self.verdicts.insert(day, crash);
        self
    }

    pub fn probability(mut self, day: NaiveDate, p: f64) -> MockBackend {
        self.probabilities.insert(day, p);
        self
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn answer_brainstorm(&self, text: &str) -> String {
        // Entity prompts carry an exact "Entity: <key>" line; look the key up
        // directly so rule markers cannot collide with provenance text.
        if let Some(key) = text.lines().find_map(|l| l.strip_prefix("Entity: ")) {
            return match self.brainstorm_rules.get(key.trim()) {
                Some(children) => render_children(children),
                None => "No further impacts worth noting.".to_string(),
            };
        }
        for (marker, children) in &self.brainstorm_rules {
            if text.contains(marker.as_str()) {
                return render_children(children);
            }
        }
        "No further impacts worth noting.".to_string()
    }

    fn answer_binary(&self, text: &str) -> String {
        let crash = latest_date(text)
            .and_then(|d| self.verdicts.get(&d).copied())
            .unwrap_or(false);
        if crash {
            "The chained impacts converge on several members at once, and the most \
             recent links amplify earlier stress.\nPrediction: Yes"
                .to_string()
        } else {
            "The impacts are scattered and none of the chains concentrate on the \
             portfolio members.\nPrediction: No"
                .to_string()
        }
    }

    fn answer_probability(&self, text: &str) -> String {
        let p = latest_date(text)
            .and_then(|d| self.probabilities.get(&d).copied())
            .unwrap_or(0.1);
        format!(
            "Cross-regional impacts suggest the funding markets are the main risk \
             channel.\nProbability: {p}"
        )
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let text = request.joined_text();
        if text.contains("Entity | Explanation") {
            Ok(self.answer_brainstorm(&text))
        } else if text.contains("Probability: <number between 0 and 1>") {
            Ok(self.answer_probability(&text))
        } else if text.contains("Prediction: Yes") {
            Ok(self.answer_binary(&text))
        } else {
            Err(Error::Parse { what: "mock prompt kind", raw: text })
        }
    }

    fn describe(&self) -> String {
        "mock".to_string()
    }
}

fn render_children(children: &[(String, String)]) -> String {
    if children.is_empty() {
        return "No further impacts worth noting.".to_string();
    }
    let reply = BrainstormReply {
        items: children
            .iter()
            .map(|(entity, explanation)| BrainstormItem {
                entity: entity.clone(),
                explanation: explanation.clone(),
            })
            .collect(),
    };
    render_brainstorm(&reply)
}

/// Latest `YYYY-MM-DD` date mentioned anywhere in the text.
fn latest_date(text: &str) -> Option<NaiveDate> {
    let bytes = text.as_bytes();
    let mut best: Option<NaiveDate> = None;
    for start in 0..bytes.len().saturating_sub(9) {
        let window = &bytes[start..start + 10];
        if window[4] != b'-' || window[7] != b'-' {
            continue;
        }
        let Ok(window) = std::str::from_utf8(window) else { continue };
        if let Ok(date) = NaiveDate::parse_from_str(window, "%Y-%m-%d") {
            best = Some(best.map_or(date, |b| b.max(date)));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Portfolio, PortfolioMode, Stock};
    use crate::graph::{RelationalTuple, Vertex};
    use crate::llm::prompts::{build_brainstorm_prompt, build_reason_prompt, PredictionMode};

    fn portfolio() -> Portfolio {
        Portfolio {
            name: "p".into(),
            mode: PortfolioMode::Stock,
            members: vec![Stock {
                ticker: "AAPL".into(),
                name: "Apple Inc.".into(),
                category: "U.S.".into(),
                aliases: vec![],
            }],
        }
    }

    #[test]
    fn brainstorm_rules_match_on_markers() {
        let mock = MockBackend::new().rule("lender halts", &[("mortgage industry", "exposed")]);
        let req = build_brainstorm_prompt(
            &Vertex::article("a"),
            "Headline: Big lender halts operations",
            &portfolio(),
            3,
        );
        let reply = mock.complete(&req).unwrap();
        assert_eq!(reply, "1. mortgage industry | exposed");
    }

    #[test]
    fn verdicts_follow_the_latest_tuple_date() {
        let d1 = NaiveDate::from_ymd_opt(2007, 6, 4).unwrap();
        let d2 = NaiveDate::from_ymd_opt(2007, 6, 5).unwrap();
        let mock = MockBackend::new().verdict(d2, true);
        let tuples = vec![
            RelationalTuple::new(d1, "a", "b"),
            RelationalTuple::new(d2, "b", "c"),
        ];
        let req = build_reason_prompt(&portfolio(), &tuples, PredictionMode::Binary, None);
        let reply = mock.complete(&req).unwrap();
        assert!(reply.ends_with("Prediction: Yes"));
        assert_eq!(mock.call_count(), 1);
    }
}
