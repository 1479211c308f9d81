//! Day-loop orchestration: brainstorm, memory, attention, reasoning, scoring,
//! and artifact output.
//!
//! The prediction phase never sees a label: labels enter only in
//! `score_outcomes`, after every prediction has been made, so look-ahead
//! leakage is ruled out by construction.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::attention::{filter_chains, rank, select_top_q, RankConfig};
use crate::brainstorm::{expand_day, Exchange, ExpansionConfig};
use crate::data::{align_next_day, Corpus, LabelSeries, TedSeries};
use crate::domain::Portfolio;
use crate::error::{Error, Result};
use crate::eval::{auroc, population_std, ScoredDay};
use crate::graph::ImpactGraph;
use crate::llm::{
    build_baseline_prompt, request_digest, BaselineVariant, ChatBackend, PredictionMode, Verdict,
};
use crate::memory::{DayCount, DecayConfig, MemoryBank};
use crate::reason::{predict_day, predict_with_request, DayPrediction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineVariant {
    Full,
    NoTemporal,
    NoDecay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    Pipeline(PipelineVariant),
    Baseline(BaselineVariant),
}

impl RunKind {
    pub fn label(&self) -> &'static str {
        match self {
            RunKind::Pipeline(PipelineVariant::Full) => "full",
            RunKind::Pipeline(PipelineVariant::NoTemporal) => "no_temporal",
            RunKind::Pipeline(PipelineVariant::NoDecay) => "no_decay",
            RunKind::Baseline(BaselineVariant::Io) => "baseline_io",
            RunKind::Baseline(BaselineVariant::Cot) => "baseline_cot",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub lambda: f64,
    pub q: usize,
    pub k: usize,
    pub expand_iterations: usize,
    pub body_char_cap: usize,
    pub damping: f64,
    pub rank_tolerance: f64,
    pub rank_max_iter: usize,
    pub repeats: usize,
    pub headline_char_budget: usize,
    pub per_entity_cap: usize,
    /// Count decay age in corpus trading days rather than calendar days.
    pub trading_day_decay: bool,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        ExperimentParams {
            lambda: 1.0,
            q: 6,
            k: 3,
            expand_iterations: 4,
            body_char_cap: 2000,
            damping: 0.85,
            rank_tolerance: 1e-8,
            rank_max_iter: 200,
            repeats: 5,
            headline_char_budget: 8000,
            per_entity_cap: 200,
            trading_day_decay: true,
        }
    }
}

pub struct ExperimentSetup<'a> {
    pub corpus: &'a Corpus,
    pub portfolio: &'a Portfolio,
    pub backend: &'a dyn ChatBackend,
    pub mode: PredictionMode,
    /// TED history rendered into probability-mode prompts.
    pub ted: Option<&'a TedSeries>,
    pub params: ExperimentParams,
    pub kind: RunKind,
}

/// Intermediate graphs for one day, persisted for `export-graph`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayGraphs {
    pub day: NaiveDate,
    pub daily: ImpactGraph,
    pub temporal: ImpactGraph,
    pub filtered: ImpactGraph,
}

#[derive(Debug)]
pub struct DayOutcome {
    pub day: NaiveDate,
    pub predictions: Vec<DayPrediction>,
    /// Transport failure that aborted the day, if any.
    pub error: Option<String>,
    pub graphs: Option<DayGraphs>,
    pub exchanges: Vec<Exchange>,
}

/// Run the prediction loop over every corpus day, strictly in order (memory
/// is stateful across days). No label data is reachable from here.
pub fn run_prediction_phase(setup: &ExperimentSetup) -> Result<Vec<DayOutcome>> {
    setup.portfolio.validate()?;
    let params = &setup.params;
    let expansion = ExpansionConfig {
        k: params.k,
        max_iterations: params.expand_iterations,
        body_char_cap: params.body_char_cap,
    };
    let rank_cfg = RankConfig {
        q: params.q,
        damping: params.damping,
        tolerance: params.rank_tolerance,
        max_iter: params.rank_max_iter,
    };
    let day_count = if params.trading_day_decay {
        DayCount::trading_days(setup.corpus.day_list())
    } else {
        DayCount::Calendar
    };
    let decay = DecayConfig {
        lambda: params.lambda,
        enabled: !matches!(setup.kind, RunKind::Pipeline(PipelineVariant::NoDecay)),
        day_count,
    };
    let temporal_enabled = !matches!(setup.kind, RunKind::Pipeline(PipelineVariant::NoTemporal));

    let mut bank = MemoryBank::with_cap(params.per_entity_cap);
    let mut outcomes = Vec::with_capacity(setup.corpus.days.len());

    for (day, articles) in &setup.corpus.days {
        let outcome = match setup.kind {
            RunKind::Pipeline(_) => run_pipeline_day(
                setup,
                &mut bank,
                *day,
                articles,
                &expansion,
                &rank_cfg,
                &decay,
                temporal_enabled,
            ),
            RunKind::Baseline(variant) => run_baseline_day(setup, *day, articles, variant),
        };
        match outcome {
            Ok(outcome) => outcomes.push(outcome),
            // A fixture miss is a configuration bug, never transient: fail
            // the whole run immediately and loudly.
            Err(e @ Error::FixtureMiss { .. }) => return Err(e),
            Err(e @ (Error::Transport(_) | Error::Http { .. })) => {
                log::error!("day {day} aborted: {e}");
                outcomes.push(DayOutcome {
                    day: *day,
                    predictions: Vec::new(),
                    error: Some(e.to_string()),
                    graphs: None,
                    exchanges: Vec::new(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(outcomes)
}

#[allow(clippy::too_many_arguments)]
fn run_pipeline_day(
    setup: &ExperimentSetup,
    bank: &mut MemoryBank,
    day: NaiveDate,
    articles: &[crate::domain::NewsArticle],
    expansion: &ExpansionConfig,
    rank_cfg: &RankConfig,
    decay: &DecayConfig,
    temporal_enabled: bool,
) -> Result<DayOutcome> {
    let expanded = expand_day(articles, setup.portfolio, expansion, setup.backend)?;
    let daily = expanded.graph;
    let temporal = if temporal_enabled { bank.retrieve(&daily) } else { daily.clone() };

    let filtered = if temporal.is_empty() {
        ImpactGraph::new()
    } else {
        let table = rank(&temporal, decay, day, rank_cfg)?;
        let top = select_top_q(&table, rank_cfg.q);
        filter_chains(&temporal, &top, setup.portfolio)
    };

    let ted_window = match (setup.mode, setup.ted) {
        (PredictionMode::Probability, Some(ted)) => Some(ted.trailing(day, 5)),
        _ => None,
    };
    let prediction = predict_day(
        &filtered,
        setup.portfolio,
        setup.mode,
        day,
        setup.backend,
        setup.params.repeats,
        ted_window.as_deref(),
    )?;

    bank.store(day, &daily)?;

    let mut exchanges = expanded.exchanges;
    exchanges.extend(prediction.exchanges);
    Ok(DayOutcome {
        day,
        predictions: prediction.predictions,
        error: None,
        graphs: Some(DayGraphs { day, daily, temporal, filtered }),
        exchanges,
    })
}

fn run_baseline_day(
    setup: &ExperimentSetup,
    day: NaiveDate,
    articles: &[crate::domain::NewsArticle],
    variant: BaselineVariant,
) -> Result<DayOutcome> {
    let headlines: Vec<String> = articles.iter().map(|a| a.headline.clone()).collect();
    let request = build_baseline_prompt(
        day,
        &headlines,
        setup.portfolio,
        variant,
        setup.params.headline_char_budget,
    );
    let digest = request_digest(&request);
    let prediction = predict_with_request(
        &request,
        &digest,
        setup.mode,
        day,
        setup.backend,
        setup.params.repeats,
    )?;
    Ok(DayOutcome {
        day,
        predictions: prediction.predictions,
        error: None,
        graphs: None,
        exchanges: prediction.exchanges,
    })
}

/// Per-(day, repeat) archive record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub day: NaiveDate,
    pub repeat: usize,
    pub verdict: Option<Verdict>,
    pub probability: Option<f64>,
    pub score: f64,
    /// Next trading day's label, when one exists.
    pub label: Option<u8>,
    pub parse_failed: bool,
    pub clamped: bool,
    pub empty_graph: bool,
    pub transcript_ref: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlagCounts {
    /// (day, repeat) records whose reply had no readable marker.
    pub parse_failed: usize,
    /// Days short-circuited on an empty filtered graph.
    pub empty_graph: usize,
    /// (day, repeat) records whose probability was clamped.
    pub clamped: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AbortedDay {
    pub day: NaiveDate,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub variant: String,
    pub mode: String,
    pub portfolio: String,
    pub params: ExperimentParams,
    pub days_total: usize,
    pub days_scored: usize,
    pub days_aborted: Vec<AbortedDay>,
    /// Prediction days dropped because no later label exists.
    pub days_unlabeled: Vec<NaiveDate>,
    /// One AUROC per prompt repeat.
    pub aurocs: Vec<f64>,
    pub auroc_mean: f64,
    /// Population standard deviation across repeats.
    pub auroc_std: f64,
    pub flags: FlagCounts,
    /// Reasoning replies mentioning a year outside the corpus window; a
    /// hint that the model answered from memorized history rather than the
    /// supplied tuples. Reported, never scored.
    pub anachronism_warnings: usize,
}

/// Join predictions with next-day labels and aggregate per-repeat AUROCs.
/// Fails when more than 20% of days aborted or when scoring is single-class.
pub fn score_outcomes(
    setup: &ExperimentSetup,
    outcomes: &[DayOutcome],
    labels: &LabelSeries,
) -> Result<(RunSummary, Vec<RunRecord>)> {
    let days_total = outcomes.len();
    let aborted: Vec<AbortedDay> = outcomes
        .iter()
        .filter_map(|o| {
            o.error.as_ref().map(|e| AbortedDay { day: o.day, error: e.clone() })
        })
        .collect();
    if days_total > 0 && aborted.len() * 5 > days_total {
        return Err(Error::RunFailed(format!(
            "{} of {} days aborted (over 20%)",
            aborted.len(),
            days_total
        )));
    }

    let usable: Vec<&DayOutcome> = outcomes.iter().filter(|o| o.error.is_none()).collect();
    let prediction_days: Vec<NaiveDate> = usable.iter().map(|o| o.day).collect();
    let (pairs, unlabeled) = align_next_day(labels, &prediction_days);
    let label_of: BTreeMap<NaiveDate, u8> = pairs.into_iter().collect();

    let mut records = Vec::new();
    let mut flags = FlagCounts { parse_failed: 0, empty_graph: 0, clamped: 0 };
    for outcome in &usable {
        if outcome.predictions.iter().any(|p| p.empty_graph) {
            flags.empty_graph += 1;
        }
        for prediction in &outcome.predictions {
            if prediction.parse_failed {
                flags.parse_failed += 1;
            }
            if prediction.clamped {
                flags.clamped += 1;
            }
            records.push(RunRecord {
                day: outcome.day,
                repeat: prediction.repeat,
                verdict: prediction.verdict,
                probability: prediction.probability,
                score: prediction.score(),
                label: label_of.get(&outcome.day).copied(),
                parse_failed: prediction.parse_failed,
                clamped: prediction.clamped,
                empty_graph: prediction.empty_graph,
                transcript_ref: prediction.transcript_ref.clone(),
            });
        }
    }

    let mut aurocs = Vec::with_capacity(setup.params.repeats);
    for repeat in 0..setup.params.repeats {
        let scored: Vec<ScoredDay> = usable
            .iter()
            .filter_map(|outcome| {
                let label = label_of.get(&outcome.day)?;
                let prediction = outcome.predictions.iter().find(|p| p.repeat == repeat)?;
                Some(ScoredDay {
                    day: outcome.day,
                    score: prediction.score(),
                    label: *label,
                    parse_failed: prediction.parse_failed,
                    empty_graph: prediction.empty_graph,
                })
            })
            .collect();
        aurocs.push(auroc(&scored)?);
    }
    let auroc_mean = aurocs.iter().sum::<f64>() / aurocs.len().max(1) as f64;
    let auroc_std = population_std(&aurocs);

    let summary = RunSummary {
        variant: setup.kind.label().to_string(),
        mode: match setup.mode {
            PredictionMode::Binary => "crash".to_string(),
            PredictionMode::Probability => "macro".to_string(),
        },
        portfolio: setup.portfolio.name.clone(),
        params: setup.params.clone(),
        days_total,
        days_scored: label_of.len(),
        days_aborted: aborted,
        days_unlabeled: unlabeled,
        aurocs,
        auroc_mean,
        auroc_std,
        flags,
        anachronism_warnings: count_anachronisms(outcomes),
    };
    Ok((summary, records))
}

/// Reasoning replies should argue from the supplied tuples, not from
/// memorized history: count replies naming a year outside the corpus window.
fn count_anachronisms(outcomes: &[DayOutcome]) -> usize {
    let years: Vec<i32> = outcomes
        .iter()
        .map(|o| chrono::Datelike::year(&o.day))
        .collect();
    let (Some(min_year), Some(max_year)) = (years.iter().min(), years.iter().max()) else {
        return 0;
    };
    let mut warnings = 0;
    for outcome in outcomes {
        for exchange in &outcome.exchanges {
            if exchange.phase != "reason" {
                continue;
            }
            if mentioned_years(&exchange.response)
                .into_iter()
                .any(|y| y < *min_year || y > *max_year)
            {
                warnings += 1;
            }
        }
    }
    warnings
}

fn mentioned_years(text: &str) -> Vec<i32> {
    let bytes = text.as_bytes();
    let mut years = Vec::new();
    let mut i = 0;
    while i + 4 <= bytes.len() {
        let window = &bytes[i..i + 4];
        let prev_is_digit = i > 0 && bytes[i - 1].is_ascii_digit();
        let next_is_digit = i + 4 < bytes.len() && bytes[i + 4].is_ascii_digit();
        if !prev_is_digit && !next_is_digit && window.iter().all(u8::is_ascii_digit) {
            let year: i32 = std::str::from_utf8(window).unwrap().parse().unwrap();
            if (1900..=2099).contains(&year) {
                years.push(year);
            }
        }
        i += 1;
    }
    years
}

/// Run the full experiment: predict every day, then score against labels.
pub fn run_experiment(
    setup: &ExperimentSetup,
    labels: &LabelSeries,
) -> Result<(RunSummary, Vec<RunRecord>, Vec<DayOutcome>)> {
    let outcomes = run_prediction_phase(setup)?;
    let (summary, records) = score_outcomes(setup, &outcomes, labels)?;
    Ok((summary, records, outcomes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Lambda,
    Q,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub auroc_mean: f64,
    pub auroc_std: f64,
}

/// One full run per parameter value over a shared corpus and fixtures. Each
/// run starts from a fresh memory bank.
pub fn sweep(
    setup: &ExperimentSetup,
    labels: &LabelSeries,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<(SweepRow, RunSummary)>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut rows = Vec::with_capacity(values.len());
    for value in values {
        let mut params = setup.params.clone();
        let name = match param {
            SweepParam::Lambda => {
                params.lambda = *value;
                "lambda"
            }
            SweepParam::Q => {
                params.q = value.round() as usize;
                "q"
            }
        };
        let run_setup = ExperimentSetup { params, ..*setup };
        let (summary, _, _) = run_experiment(&run_setup, labels)?;
        rows.push((
            SweepRow {
                param: name.to_string(),
                value: *value,
                auroc_mean: summary.auroc_mean,
                auroc_std: summary.auroc_std,
            },
            summary,
        ));
    }
    Ok(rows)
}

/// Write the run artifacts into `out_dir`:
/// `summary.json`, `results.csv`, `records.jsonl`, `transcripts.jsonl`, and
/// `graphs/<day>.json`. Output depends only on run inputs, so identical runs
/// produce byte-identical files.
pub fn write_artifacts(
    out_dir: &Path,
    summary: &RunSummary,
    records: &[RunRecord],
    outcomes: &[DayOutcome],
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;

    let mut summary_json = serde_json::to_string_pretty(summary)?;
    summary_json.push('\n');
    std::fs::write(out_dir.join("summary.json"), summary_json)?;

    let mut results = String::from("run,auroc\n");
    for (i, value) in summary.aurocs.iter().enumerate() {
        results.push_str(&format!("{},{}\n", i + 1, value));
    }
    std::fs::write(out_dir.join("results.csv"), results)?;

    let mut records_out = std::fs::File::create(out_dir.join("records.jsonl"))?;
    for record in records {
        writeln!(records_out, "{}", serde_json::to_string(record)?)?;
    }

    let mut transcript = std::fs::File::create(out_dir.join("transcripts.jsonl"))?;
    for outcome in outcomes {
        for exchange in &outcome.exchanges {
            let line = json!({
                "day": outcome.day,
                "phase": exchange.phase,
                "repeat": exchange.repeat,
                "subject": exchange.subject,
                "prompt_digest": exchange.prompt_digest,
                "raw_response": exchange.response,
            });
            writeln!(transcript, "{line}")?;
        }
    }

    let graphs_dir = out_dir.join("graphs");
    std::fs::create_dir_all(&graphs_dir)?;
    for outcome in outcomes {
        if let Some(graphs) = &outcome.graphs {
            let mut text = serde_json::to_string_pretty(graphs)?;
            text.push('\n');
            std::fs::write(graphs_dir.join(format!("{}.json", outcome.day)), text)?;
        }
    }
    Ok(())
}
