//! Prompt construction for the brainstorm, reasoning, and baseline modes.
//!
//! The templates here are contract text: the scripted backend keys fixtures
//! on a digest of the rendered messages, so any wording change deliberately
//! invalidates recorded fixtures.

use crate::domain::{Portfolio, PortfolioMode};
use crate::graph::{RelationalTuple, Vertex, VertexKind};
use crate::llm::ChatRequest;

/// Model name placed on requests by default. The HTTP backend substitutes its
/// configured model; the scripted backend ignores it entirely.
pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionMode {
    /// Yes/no portfolio crash call.
    Binary,
    /// Continuous crisis indicator in [0, 1].
    Probability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineVariant {
    Io,
    Cot,
}

const BRAINSTORM_SYSTEM: &str = "You are a financial analyst who traces how news \
events ripple through industries, markets, regions, and companies.";

fn format_instruction(k: usize) -> String {
    format!(
        "List at most {k} impacted entities, one per line, numbered, in the format:\n\
         1. Entity | Explanation"
    )
}

fn portfolio_line(portfolio: &Portfolio) -> String {
    format!("The target portfolio contains: {}.", portfolio.member_names().join(", "))
}

/// Brainstorm prompt for one frontier vertex. For article vertices
/// `source_text` is the rendered headline/body block; for entity vertices it
/// is the provenance chain that led to the entity.
pub fn build_brainstorm_prompt(
    source: &Vertex,
    source_text: &str,
    portfolio: &Portfolio,
    k: usize,
) -> ChatRequest {
    let body = match source.kind {
        VertexKind::Article => format!(
            "A news article is given below.\n\n{source_text}\n\n{portfolio}\n\n\
             Brainstorm which entities this news directly impacts. If an impacted \
             entity is a portfolio member, write its name exactly as listed above.\n\n{format}",
            portfolio = portfolio_line(portfolio),
            format = format_instruction(k),
        ),
        _ => format!(
            "A chain of news impacts has reached the entity below.\n\n\
             Entity: {key}\nImpact chain so far: {source_text}\n\n{portfolio}\n\n\
             Brainstorm which entities are impacted next by {key}. If an impacted \
             entity is a portfolio member, write its name exactly as listed above.\n\n{format}",
            key = source.key,
            portfolio = portfolio_line(portfolio),
            format = format_instruction(k),
        ),
    };
    ChatRequest::new(DEFAULT_MODEL).system(BRAINSTORM_SYSTEM).user(body)
}

/// Reasoning prompt over the filtered graph rendered as relational tuples.
/// Tuples must already be in presentation order (level-major, then date).
pub fn build_reason_prompt(
    portfolio: &Portfolio,
    tuples: &[RelationalTuple],
    mode: PredictionMode,
    ted_context: Option<&[f64]>,
) -> ChatRequest {
    let system = match portfolio.mode {
        PortfolioMode::Stock => "You are a risk analyst assessing a stock portfolio.",
        PortfolioMode::Economy => {
            "You are a risk analyst assessing a network of regional economies."
        }
    };
    let tuple_block = tuples.iter().map(|t| t.render()).collect::<Vec<_>>().join("\n");
    let mut body = format!(
        "{portfolio}\n\nNews impact chains are given as relational tuples \
         (date, subject, impacts, object), ordered by chain level and date:\n{tuple_block}\n",
        portfolio = portfolio_line(portfolio),
    );
    if let Some(values) = ted_context {
        let rendered = values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ");
        body.push_str(&format!(
            "\nPast 5 days of TED spread (percentage points): {rendered}.\n"
        ));
    }
    body.push_str(
        "\nReason about how these impacts interact and what they mean for the \
         portfolio, using only the tuples given above. Do not rely on memorized \
         knowledge of historical events or dates.\n\n",
    );
    match mode {
        PredictionMode::Binary => body.push_str(
            "Will the portfolio crash on the next trading day? Finish with one \
             final line in exactly this form:\nPrediction: Yes\nor\nPrediction: No",
        ),
        PredictionMode::Probability => body.push_str(
            "What is the probability of a widespread crisis on the next trading \
             day? Finish with one final line in exactly this form:\n\
             Probability: <number between 0 and 1>",
        ),
    }
    ChatRequest::new(DEFAULT_MODEL).system(system).user(body)
}

/// Headline-only baseline prompt. Headlines are truncated to `char_budget`
/// rendered characters, dropping the oldest first.
pub fn build_baseline_prompt(
    date: chrono::NaiveDate,
    headlines: &[String],
    portfolio: &Portfolio,
    variant: BaselineVariant,
    char_budget: usize,
) -> ChatRequest {
    let kept = truncate_oldest_first(headlines, char_budget);
    let mut body = format!("News headlines for {date}:\n");
    for headline in kept {
        body.push_str("- ");
        body.push_str(headline);
        body.push('\n');
    }
    body.push_str(&format!("\n{}\n", portfolio_line(portfolio)));
    if variant == BaselineVariant::Cot {
        body.push_str("\nLet's think step-by-step.\n");
    }
    body.push_str(
        "\nWill the portfolio crash on the next trading day? Finish with one \
         final line in exactly this form:\nPrediction: Yes\nor\nPrediction: No",
    );
    ChatRequest::new(DEFAULT_MODEL)
        .system("You are a risk analyst assessing a stock portfolio.")
        .user(body)
}

/// Keep the longest suffix of headlines whose rendered length fits the
/// budget. Always keeps at least the newest headline.
fn truncate_oldest_first(headlines: &[String], char_budget: usize) -> Vec<&String> {
    let mut total = 0usize;
    let mut start = headlines.len();
    for (i, headline) in headlines.iter().enumerate().rev() {
        let cost = headline.len() + 3; // "- " prefix and newline
        if total + cost > char_budget && start < headlines.len() {
            break;
        }
        total += cost;
        start = i;
        if total > char_budget {
            break;
        }
    }
    headlines[start..].iter().collect()
}
