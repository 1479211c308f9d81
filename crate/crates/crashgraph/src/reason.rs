//! Serialize the filtered graph to relational tuples and obtain the day's
//! prediction from the backend.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::brainstorm::Exchange;
use crate::domain::Portfolio;
use crate::error::{Error, Result};
use crate::graph::{article_levels, ImpactGraph, RelationalTuple};
use crate::llm::{
    build_reason_prompt, parse_prediction, request_digest, ChatBackend, PredictionMode, Verdict,
};
use crate::par;

/// Outcome of one reasoning repeat for one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayPrediction {
    pub day: NaiveDate,
    pub repeat: usize,
    pub verdict: Option<Verdict>,
    pub probability: Option<f64>,
    /// The reply had no readable marker and the conservative default
    /// (no-crash / 0.0) was substituted.
    pub parse_failed: bool,
    /// The reported probability was clamped into [0, 1].
    pub clamped: bool,
    /// The graph was empty, so no backend call was made.
    pub empty_graph: bool,
    /// Digest of the prompt that produced this prediction, pointing into the
    /// transcript log. Empty for short-circuited days.
    pub transcript_ref: String,
}

impl DayPrediction {
    /// Score used by the evaluation harness: binary verdicts map to 1.0/0.0,
    /// probability mode passes through.
    pub fn score(&self) -> f64 {
        match (self.verdict, self.probability) {
            (Some(Verdict::Crash), _) => 1.0,
            (Some(Verdict::NoCrash), _) => 0.0,
            (None, Some(p)) => p,
            (None, None) => 0.0,
        }
    }
}

/// One edge per tuple, ordered by (level of subject, date, subject key,
/// object key), where level is the shortest distance from any article vertex.
/// Edges whose subject is unreachable from every article sort last.
pub fn to_tuples(filtered: &ImpactGraph) -> Vec<RelationalTuple> {
    let levels = article_levels(filtered);
    let mut keyed: Vec<(usize, RelationalTuple)> = filtered
        .edges()
        .map(|edge| {
            let level = levels.get(&edge.from).copied().unwrap_or(usize::MAX);
            (level, RelationalTuple::new(edge.day, &edge.from.key, &edge.to.key))
        })
        .collect();
    keyed.sort_by(|a, b| {
        (a.0, a.1.t, &a.1.subject, &a.1.object).cmp(&(b.0, b.1.t, &b.1.subject, &b.1.object))
    });
    keyed.into_iter().map(|(_, tuple)| tuple).collect()
}

pub struct DayPredictionOutput {
    pub predictions: Vec<DayPrediction>,
    pub exchanges: Vec<Exchange>,
}

/// Ask the backend for the day's prediction `repeats` times over one shared
/// prompt. An empty graph short-circuits to the negative prediction without
/// burning a backend call; the flag lets evaluation audit those days.
pub fn predict_day(
    filtered: &ImpactGraph,
    portfolio: &Portfolio,
    mode: PredictionMode,
    day: NaiveDate,
    backend: &dyn ChatBackend,
    repeats: usize,
    ted_context: Option<&[f64]>,
) -> Result<DayPredictionOutput> {
    let tuples = to_tuples(filtered);
    if tuples.is_empty() {
        let predictions = (0..repeats)
            .map(|repeat| DayPrediction {
                day,
                repeat,
                verdict: matches!(mode, PredictionMode::Binary).then_some(Verdict::NoCrash),
                probability: matches!(mode, PredictionMode::Probability).then_some(0.0),
                parse_failed: false,
                clamped: false,
                empty_graph: true,
                transcript_ref: String::new(),
            })
            .collect();
        return Ok(DayPredictionOutput { predictions, exchanges: Vec::new() });
    }

    let request = build_reason_prompt(portfolio, &tuples, mode, ted_context);
    let digest = request_digest(&request);
    predict_with_request(&request, &digest, mode, day, backend, repeats)
}

/// Shared repeat loop, also used by the headline baselines with their own
/// prompt.
pub(crate) fn predict_with_request(
    request: &crate::llm::ChatRequest,
    digest: &str,
    mode: PredictionMode,
    day: NaiveDate,
    backend: &dyn ChatBackend,
    repeats: usize,
) -> Result<DayPredictionOutput> {
    let indices: Vec<usize> = (0..repeats).collect();
    let raw_replies = par::map_slice(&indices, |_| backend.complete(request));

    let mut predictions = Vec::with_capacity(repeats);
    let mut exchanges = Vec::with_capacity(repeats);
    for (repeat, raw) in raw_replies.into_iter().enumerate() {
        let raw = raw?; // transport failure marks the whole day failed
        exchanges.push(Exchange {
            phase: "reason".to_string(),
            subject: format!("repeat-{repeat}"),
            repeat: Some(repeat),
            prompt_digest: digest.to_string(),
            response: raw.clone(),
        });
        let prediction = match parse_prediction(&raw, mode) {
            Ok(reply) => DayPrediction {
                day,
                repeat,
                verdict: reply.verdict,
                probability: reply.probability,
                parse_failed: false,
                clamped: reply.clamped,
                empty_graph: false,
                transcript_ref: digest.to_string(),
            },
            Err(Error::Parse { .. }) => DayPrediction {
                day,
                repeat,
                verdict: matches!(mode, PredictionMode::Binary).then_some(Verdict::NoCrash),
                probability: matches!(mode, PredictionMode::Probability).then_some(0.0),
                parse_failed: true,
                clamped: false,
                empty_graph: false,
                transcript_ref: digest.to_string(),
            },
            Err(other) => return Err(other),
        };
        predictions.push(prediction);
    }
    Ok(DayPredictionOutput { predictions, exchanges })
}
