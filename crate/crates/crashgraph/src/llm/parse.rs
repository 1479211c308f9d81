//! Strict parsing of model responses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::normalize_entity;
use crate::llm::prompts::PredictionMode;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrainstormItem {
    /// Canonical (normalized) entity key.
    pub entity: String,
    /// Free-text justification, kept for transcripts only.
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BrainstormReply {
    pub items: Vec<BrainstormItem>,
}

/// Parse numbered `Entity | Explanation` lines. Lines that do not match the
/// format, or whose entity normalizes to nothing, are skipped; at most `k`
/// items are kept. A reply with zero parseable lines is an error carrying the
/// raw text so the run log can show what the model actually said.
pub fn parse_brainstorm(raw: &str, k: usize) -> Result<BrainstormReply> {
    let mut items = Vec::new();
    for line in raw.lines() {
        if items.len() == k {
            break;
        }
        let Some(rest) = strip_list_number(line) else { continue };
        let (entity_raw, explanation) = match rest.split_once('|') {
            Some((e, x)) => (e.trim(), x.trim()),
            None => (rest.trim(), ""),
        };
        let Ok(entity) = normalize_entity(entity_raw) else { continue };
        items.push(BrainstormItem { entity, explanation: explanation.to_string() });
    }
    if items.is_empty() {
        return Err(Error::Parse { what: "brainstorm reply", raw: raw.to_string() });
    }
    Ok(BrainstormReply { items })
}

/// Inverse of `parse_brainstorm` for replies with canonical entities.
pub fn render_brainstorm(reply: &BrainstormReply) -> String {
    reply
        .items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            if item.explanation.is_empty() {
                format!("{}. {}", i + 1, item.entity)
            } else {
                format!("{}. {} | {}", i + 1, item.entity, item.explanation)
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn strip_list_number(line: &str) -> Option<&str> {
    let trimmed = line.trim_start();
    let digits = trimmed.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        return None;
    }
    let rest = &trimmed[digits..];
    let rest = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))?;
    Some(rest.trim_start())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Crash,
    NoCrash,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReply {
    pub verdict: Option<Verdict>,
    pub probability: Option<f64>,
    /// Set when the reported probability had to be clamped into [0, 1].
    pub clamped: bool,
    /// Full raw response, retained for the transcript log.
    pub explanation: String,
}

/// Extract the final answer marker. In binary mode the last case-insensitive
/// `Prediction: Yes|No` wins; in probability mode the last `Probability: x`
/// wins with `x` clamped into [0, 1]. A missing marker is a parse error; the
/// caller substitutes the conservative default and flags the day.
pub fn parse_prediction(raw: &str, mode: PredictionMode) -> Result<PredictionReply> {
    let lower = raw.to_lowercase();
    match mode {
        PredictionMode::Binary => {
            let at = lower
                .rfind("prediction:")
                .ok_or(Error::Parse { what: "prediction marker", raw: raw.to_string() })?;
            let rest = lower[at + "prediction:".len()..].trim_start();
            let token: String =
                rest.chars().skip_while(|c| !c.is_ascii_alphabetic()).take_while(|c| c.is_ascii_alphabetic()).collect();
            let verdict = match token.as_str() {
                "yes" => Verdict::Crash,
                "no" => Verdict::NoCrash,
                _ => {
                    return Err(Error::Parse { what: "prediction verdict", raw: raw.to_string() })
                }
            };
            Ok(PredictionReply {
                verdict: Some(verdict),
                probability: None,
                clamped: false,
                explanation: raw.to_string(),
            })
        }
        PredictionMode::Probability => {
            let at = lower
                .rfind("probability:")
                .ok_or(Error::Parse { what: "probability marker", raw: raw.to_string() })?;
            let rest = lower[at + "probability:".len()..].trim_start();
            let token: String = rest
                .chars()
                .take_while(|c| c.is_ascii_digit() || matches!(c, '.' | '+' | '-' | 'e'))
                .collect();
            let value: f64 = token
                .trim_end_matches(['.', '+', '-', 'e'])
                .parse()
                .map_err(|_| Error::Parse { what: "probability value", raw: raw.to_string() })?;
            if !value.is_finite() {
                return Err(Error::Parse { what: "probability value", raw: raw.to_string() });
            }
            let clamped_value = value.clamp(0.0, 1.0);
            Ok(PredictionReply {
                verdict: None,
                probability: Some(clamped_value),
                clamped: clamped_value != value,
                explanation: raw.to_string(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_two_numbered_items() {
        let reply =
            parse_brainstorm("1. Mortgage industry | hurt\n2. U.S. housing market | falls", 6)
                .unwrap();
        assert_eq!(reply.items.len(), 2);
        assert_eq!(reply.items[0].entity, "mortgage industry");
        assert_eq!(reply.items[1].entity, "u.s. housing market");
        assert_eq!(reply.items[0].explanation, "hurt");
    }

    #[test]
    fn prose_without_numbered_lines_is_a_parse_error() {
        let err = parse_brainstorm("no impacts.", 6).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn truncates_to_k_items() {
        let raw = "1. a | x\n2. b | x\n3. c | x\n4. d | x\n5. e | x";
        let reply = parse_brainstorm(raw, 3).unwrap();
        assert_eq!(reply.items.len(), 3);
        assert_eq!(reply.items[2].entity, "c");
    }

    #[test]
    fn missing_explanation_is_tolerated() {
        let reply = parse_brainstorm("1. credit markets", 6).unwrap();
        assert_eq!(reply.items[0].entity, "credit markets");
        assert_eq!(reply.items[0].explanation, "");
    }

    proptest! {
        #[test]
        fn render_then_parse_round_trips(
            items in prop::collection::vec(
                ("[a-z][a-z ]{0,20}[a-z]", "[ -{}~!#-Z]{0,30}"),
                1..6,
            )
        ) {
            let reply = BrainstormReply {
                items: items
                    .into_iter()
                    .filter_map(|(e, x)| {
                        let entity = normalize_entity(&e).ok()?;
                        Some(BrainstormItem { entity, explanation: x.trim().to_string() })
                    })
                    .collect(),
            };
            prop_assume!(!reply.items.is_empty());
            let parsed = parse_brainstorm(&render_brainstorm(&reply), reply.items.len()).unwrap();
            prop_assert_eq!(parsed, reply);
        }
    }

    #[test]
    fn last_prediction_marker_wins() {
        let raw = "Maybe Prediction: No at first, but reconsidering...\nPrediction: Yes";
        let reply = parse_prediction(raw, PredictionMode::Binary).unwrap();
        assert_eq!(reply.verdict, Some(Verdict::Crash));
    }

    #[test]
    fn prediction_is_case_insensitive() {
        let reply = parse_prediction("...pREDICTION: no", PredictionMode::Binary).unwrap();
        assert_eq!(reply.verdict, Some(Verdict::NoCrash));
    }

    #[test]
    fn missing_marker_is_a_parse_error() {
        assert!(parse_prediction("total collapse imminent", PredictionMode::Binary).is_err());
        assert!(parse_prediction("who knows", PredictionMode::Probability).is_err());
    }

    #[test]
    fn probability_is_extracted_and_clamped() {
        let reply = parse_prediction("Probability: 0.85", PredictionMode::Probability).unwrap();
        assert_eq!(reply.probability, Some(0.85));
        assert!(!reply.clamped);

        let reply = parse_prediction("Probability: 1.7", PredictionMode::Probability).unwrap();
        assert_eq!(reply.probability, Some(1.0));
        assert!(reply.clamped);
    }

    proptest! {
        #[test]
        fn probability_never_leaves_unit_interval(raw in "[ -~\n]{0,120}") {
            if let Ok(reply) = parse_prediction(&raw, PredictionMode::Probability) {
                let p = reply.probability.unwrap();
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }
    }
}
