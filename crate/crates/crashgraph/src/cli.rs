//! Command-line entry points: `run`, `sweep`, `export-graph`, and `macro`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use crate::config::{resolve_portfolio, BackendKind, FileConfig, RunConfig};
use crate::data::{
    crash_labels, crisis_labels, daily_returns, load_corpus, load_prices, load_ted,
    percentile_threshold, LabelSeries, TedSeries, DEFAULT_CRASH_THRESHOLD,
    DEFAULT_CRISIS_THRESHOLD,
};
use crate::domain::Portfolio;
use crate::error::{Error, Result};
use crate::eval::{
    run_experiment, sweep, write_artifacts, DayGraphs, ExperimentParams, ExperimentSetup,
    PipelineVariant, RunKind, SweepParam,
};
use crate::export::{export_dot, graph_to_json, indicator_svg, DotOptions};
use crate::llm::{BaselineVariant, PredictionMode};

#[derive(Parser)]
#[command(
    name = "crashgraph",
    version,
    about = "Temporal news-impact graphs and LLM reasoning for next-day portfolio crash detection"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline (or an ablation/baseline) and write artifacts.
    Run(CommonArgs),
    /// Re-run the pipeline over a grid of lambda or q values.
    Sweep(SweepArgs),
    /// Export an archived day graph as DOT or lossless JSON.
    #[command(name = "export-graph")]
    ExportGraph(ExportArgs),
    /// Global-crisis indicator mode: probability output over an economies
    /// portfolio, plus an indicator CSV and SVG plot.
    #[command(name = "macro")]
    Macro(CommonArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Line-delimited JSON corpus {id?, date, headline, body?}.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// CSV date,ticker,close (crash mode labels).
    #[arg(long)]
    prices: Option<PathBuf>,
    /// CSV date,spread (macro mode labels and prompt context).
    #[arg(long)]
    ted: Option<PathBuf>,
    /// Bundled fixture name (country_neutral, sector_neutral, economies) or a
    /// JSON file path.
    #[arg(long)]
    portfolio: Option<String>,
    /// scripted:<fixture.jsonl> or http:<url>.
    #[arg(long)]
    backend: Option<String>,
    /// Memory decay rate constant.
    #[arg(long)]
    lambda: Option<f64>,
    /// Top-q entities kept by the attention filter.
    #[arg(long)]
    q: Option<usize>,
    /// Entities requested per brainstorm expansion.
    #[arg(long)]
    k: Option<usize>,
    /// Maximum brainstorm expansion iterations per day.
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// Ranking damping factor.
    #[arg(long)]
    damping: Option<f64>,
    /// Reasoning prompt repeats per day.
    #[arg(long)]
    repeats: Option<usize>,
    /// crash (binary) or macro (probability).
    #[arg(long)]
    mode: Option<String>,
    /// Ablation variant: no_temporal or no_decay.
    #[arg(long)]
    ablate: Option<String>,
    /// Headline-only baseline: io or cot.
    #[arg(long)]
    baseline: Option<String>,
    /// Output directory (default runs/<timestamp>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Crash label threshold on next-day returns (default -0.02, inclusive).
    #[arg(long = "crash-threshold")]
    crash_threshold: Option<f64>,
    /// Derive the crash threshold from this return percentile instead.
    #[arg(long)]
    percentile: Option<f64>,
    /// Crisis label threshold on the TED spread (default 0.48, strict).
    #[arg(long = "crisis-threshold")]
    crisis_threshold: Option<f64>,
    /// Vertices labeled in DOT exports.
    #[arg(long = "label-top")]
    label_top: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Parameter to sweep: lambda or q.
    #[arg(long)]
    param: String,
    /// Comma-separated values, e.g. 0.1,0.5,1,2,10.
    #[arg(long)]
    values: String,
}

#[derive(Args)]
struct ExportArgs {
    /// Run output directory holding graphs/<day>.json.
    #[arg(long)]
    run: PathBuf,
    /// Day to export.
    #[arg(long)]
    day: NaiveDate,
    /// dot or json.
    #[arg(long, default_value = "dot")]
    format: String,
    /// Which archived graph: daily, temporal, or filtered.
    #[arg(long, default_value = "filtered")]
    stage: String,
    /// Output file (default <run>/exports/<day>-<stage>.<ext>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Vertices labeled in DOT output.
    #[arg(long = "label-top")]
    label_top: Option<usize>,
}

pub fn main_with_args<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| {
        // clap already formats usage errors; let them print as-is.
        e.print().ok();
        Error::Config("invalid arguments".into())
    })?;
    match cli.command {
        Command::Run(common) => cmd_run(resolve_config(common, None)?),
        Command::Macro(common) => cmd_macro(resolve_config(common, Some("macro"))?),
        Command::Sweep(args) => cmd_sweep(args),
        Command::ExportGraph(args) => cmd_export_graph(args),
    }
}

fn resolve_config(args: CommonArgs, forced_mode: Option<&str>) -> Result<RunConfig> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let defaults = ExperimentParams::default();
    let corpus = args
        .corpus
        .or_else(|| file.corpus.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::Config("missing required field: corpus".into()))?;
    let backend_spec = args
        .backend
        .or_else(|| file.backend.clone())
        .ok_or_else(|| Error::Config("missing required field: backend".into()))?;
    let mode = forced_mode
        .map(str::to_string)
        .or(args.mode)
        .or_else(|| file.mode.clone())
        .unwrap_or_else(|| "crash".to_string());
    if mode != "crash" && mode != "macro" {
        return Err(Error::Config(format!("mode must be crash or macro, got {mode:?}")));
    }
    let portfolio = args
        .portfolio
        .or_else(|| file.portfolio.clone())
        .unwrap_or_else(|| {
            if mode == "macro" { "economies".to_string() } else { "country_neutral".to_string() }
        });
    let params = ExperimentParams {
        lambda: args.lambda.or(file.lambda).unwrap_or(defaults.lambda),
        q: args.q.or(file.q).unwrap_or(defaults.q),
        k: args.k.or(file.k).unwrap_or(defaults.k),
        expand_iterations: args.max_iter.or(file.max_iter).unwrap_or(defaults.expand_iterations),
        damping: args.damping.or(file.damping).unwrap_or(defaults.damping),
        repeats: args.repeats.or(file.repeats).unwrap_or(defaults.repeats),
        ..defaults
    };
    if params.lambda <= 0.0 {
        return Err(Error::Config("lambda must be positive".into()));
    }
    if !(0.0..1.0).contains(&params.damping) {
        return Err(Error::Config("damping must lie in (0, 1)".into()));
    }
    Ok(RunConfig {
        corpus,
        prices: args.prices.or_else(|| file.prices.as_ref().map(PathBuf::from)),
        ted: args.ted.or_else(|| file.ted.as_ref().map(PathBuf::from)),
        portfolio,
        backend: BackendKind::parse(&backend_spec)?,
        params,
        mode,
        ablate: args.ablate.or(file.ablate),
        baseline: args.baseline.or(file.baseline),
        out: args.out.or_else(|| file.out.as_ref().map(PathBuf::from)),
        crash_threshold: args
            .crash_threshold
            .or(file.crash_threshold)
            .unwrap_or(DEFAULT_CRASH_THRESHOLD),
        percentile: args.percentile.or(file.percentile),
        crisis_threshold: args
            .crisis_threshold
            .or(file.crisis_threshold)
            .unwrap_or(DEFAULT_CRISIS_THRESHOLD),
        label_top: args.label_top.or(file.label_top).unwrap_or(5),
        http: file.http.to_http_config(),
    })
}

fn run_kind(config: &RunConfig) -> Result<RunKind> {
    match (&config.ablate, &config.baseline) {
        (Some(_), Some(_)) => {
            Err(Error::Config("ablate and baseline are mutually exclusive".into()))
        }
        (Some(ablate), None) => match ablate.as_str() {
            "no_temporal" => Ok(RunKind::Pipeline(PipelineVariant::NoTemporal)),
            "no_decay" => Ok(RunKind::Pipeline(PipelineVariant::NoDecay)),
            "full" => Ok(RunKind::Pipeline(PipelineVariant::Full)),
            other => Err(Error::Config(format!(
                "ablate must be no_temporal or no_decay, got {other:?}"
            ))),
        },
        (None, Some(baseline)) => match baseline.as_str() {
            "io" => Ok(RunKind::Baseline(BaselineVariant::Io)),
            "cot" => Ok(RunKind::Baseline(BaselineVariant::Cot)),
            other => Err(Error::Config(format!("baseline must be io or cot, got {other:?}"))),
        },
        (None, None) => Ok(RunKind::Pipeline(PipelineVariant::Full)),
    }
}

struct PreparedRun {
    portfolio: Portfolio,
    corpus: crate::data::Corpus,
    labels: LabelSeries,
    ted: Option<TedSeries>,
    mode: PredictionMode,
    kind: RunKind,
}

fn prepare(config: &RunConfig) -> Result<PreparedRun> {
    let portfolio = resolve_portfolio(&config.portfolio)?;
    let corpus = load_corpus(&config.corpus)?;
    let kind = run_kind(config)?;

    let (labels, ted, mode) = if config.mode == "macro" {
        let ted_path = config
            .ted
            .as_ref()
            .ok_or_else(|| Error::Config("missing required field: ted (macro mode)".into()))?;
        let ted = load_ted(ted_path)?;
        let labels = crisis_labels(&ted, config.crisis_threshold);
        (labels, Some(ted), PredictionMode::Probability)
    } else {
        let prices_path = config
            .prices
            .as_ref()
            .ok_or_else(|| Error::Config("missing required field: prices (crash mode)".into()))?;
        let prices = load_prices(prices_path)?;
        let mut per_stock = BTreeMap::new();
        for member in &portfolio.members {
            match prices.get(&member.ticker) {
                Some(series) => {
                    per_stock.insert(member.ticker.clone(), daily_returns(series)?);
                }
                None => log::warn!(
                    "no price data for {}; averaging over the remaining members",
                    member.ticker
                ),
            }
        }
        let returns = crate::data::portfolio_returns(&per_stock)?;
        let threshold = match config.percentile {
            Some(p) => percentile_threshold(&returns, p)?,
            None => config.crash_threshold,
        };
        (crash_labels(&returns, threshold), None, PredictionMode::Binary)
    };
    Ok(PreparedRun { portfolio, corpus, labels, ted, mode, kind })
}

/// Pick runs/<timestamp> (with a uniquifying suffix on collision) unless an
/// output directory was given explicitly.
fn output_dir(config: &RunConfig) -> PathBuf {
    if let Some(out) = &config.out {
        return out.clone();
    }
    let stamp = chrono::Utc::now().format("%Y%m%d-%H%M%S").to_string();
    let base = PathBuf::from("runs");
    let mut candidate = base.join(&stamp);
    let mut n = 1;
    while candidate.exists() {
        n += 1;
        candidate = base.join(format!("{stamp}-{n}"));
    }
    candidate
}

fn cmd_run(config: RunConfig) -> Result<()> {
    let prepared = prepare(&config)?;
    let backend = config.backend.build(&config.http)?;
    let setup = ExperimentSetup {
        corpus: &prepared.corpus,
        portfolio: &prepared.portfolio,
        backend: backend.as_ref(),
        mode: prepared.mode,
        ted: prepared.ted.as_ref(),
        params: config.params.clone(),
        kind: prepared.kind,
    };
    let (summary, records, outcomes) = run_experiment(&setup, &prepared.labels)?;
    let out_dir = output_dir(&config);
    write_artifacts(&out_dir, &summary, &records, &outcomes)?;
    println!(
        "{} variant={} auroc_mean={:.4} auroc_std={:.4} days_scored={}",
        out_dir.join("summary.json").display(),
        summary.variant,
        summary.auroc_mean,
        summary.auroc_std,
        summary.days_scored,
    );
    Ok(())
}

fn cmd_macro(config: RunConfig) -> Result<()> {
    let prepared = prepare(&config)?;
    let backend = config.backend.build(&config.http)?;
    let setup = ExperimentSetup {
        corpus: &prepared.corpus,
        portfolio: &prepared.portfolio,
        backend: backend.as_ref(),
        mode: prepared.mode,
        ted: prepared.ted.as_ref(),
        params: config.params.clone(),
        kind: prepared.kind,
    };
    let (summary, records, outcomes) = run_experiment(&setup, &prepared.labels)?;
    let out_dir = output_dir(&config);
    write_artifacts(&out_dir, &summary, &records, &outcomes)?;

    // Indicator: mean probability across repeats, one row per labeled day.
    let mut by_day: BTreeMap<NaiveDate, (f64, usize, Option<u8>)> = BTreeMap::new();
    for record in &records {
        let entry = by_day.entry(record.day).or_insert((0.0, 0, None));
        entry.0 += record.score;
        entry.1 += 1;
        entry.2 = record.label;
    }
    let mut csv = String::from("day,probability,label\n");
    let mut rows = Vec::new();
    for (day, (total, count, label)) in &by_day {
        let Some(label) = label else { continue };
        let probability = total / *count as f64;
        csv.push_str(&format!("{day},{probability},{label}\n"));
        rows.push((*day, probability, *label));
    }
    std::fs::write(out_dir.join("indicator.csv"), csv)?;
    std::fs::write(out_dir.join("indicator.svg"), indicator_svg(&rows))?;
    println!(
        "{} auroc_mean={:.4} rows={}",
        out_dir.join("indicator.csv").display(),
        summary.auroc_mean,
        rows.len(),
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let config = resolve_config(args.common, None)?;
    let param = match args.param.as_str() {
        "lambda" => SweepParam::Lambda,
        "q" => SweepParam::Q,
        other => return Err(Error::Config(format!("param must be lambda or q, got {other:?}"))),
    };
    let values: Vec<f64> = args
        .values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad sweep value {v:?}: {e}")))
        })
        .collect::<Result<_>>()?;

    let prepared = prepare(&config)?;
    let backend = config.backend.build(&config.http)?;
    let setup = ExperimentSetup {
        corpus: &prepared.corpus,
        portfolio: &prepared.portfolio,
        backend: backend.as_ref(),
        mode: prepared.mode,
        ted: prepared.ted.as_ref(),
        params: config.params.clone(),
        kind: prepared.kind,
    };
    let rows = sweep(&setup, &prepared.labels, param, &values)?;

    let out_dir = output_dir(&config);
    std::fs::create_dir_all(&out_dir)?;
    let mut csv = String::from("param,value,auroc_mean,auroc_std\n");
    for (row, _) in &rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.param, row.value, row.auroc_mean, row.auroc_std
        ));
    }
    std::fs::write(out_dir.join("sweep.csv"), &csv)?;
    let summaries: Vec<_> = rows.iter().map(|(_, s)| s).collect();
    let mut sweep_json = serde_json::to_string_pretty(&summaries)?;
    sweep_json.push('\n');
    std::fs::write(out_dir.join("sweep.json"), sweep_json)?;
    println!("{} values={}", out_dir.join("sweep.csv").display(), rows.len());
    Ok(())
}

fn cmd_export_graph(args: ExportArgs) -> Result<()> {
    let archive_path = args.run.join("graphs").join(format!("{}.json", args.day));
    let text = std::fs::read_to_string(&archive_path).map_err(|e| {
        Error::Config(format!("no graph archive at {}: {e}", archive_path.display()))
    })?;
    let graphs: DayGraphs = serde_json::from_str(&text)?;
    let graph = match args.stage.as_str() {
        "daily" => &graphs.daily,
        "temporal" => &graphs.temporal,
        "filtered" => &graphs.filtered,
        other => {
            return Err(Error::Config(format!(
                "stage must be daily, temporal, or filtered, got {other:?}"
            )))
        }
    };
    let (rendered, extension) = match args.format.as_str() {
        "dot" => (
            export_dot(graph, &DotOptions { label_top: args.label_top.unwrap_or(5) }),
            "dot",
        ),
        "json" => (graph_to_json(graph)?, "json"),
        other => return Err(Error::Config(format!("format must be dot or json, got {other:?}"))),
    };
    let out_path = match args.out {
        Some(path) => path,
        None => {
            let dir = args.run.join("exports");
            std::fs::create_dir_all(&dir)?;
            dir.join(format!("{}-{}.{extension}", args.day, args.stage))
        }
    };
    let mut file = std::fs::File::create(&out_path)?;
    file.write_all(rendered.as_bytes())?;
    println!("{}", out_path.display());
    Ok(())
}
