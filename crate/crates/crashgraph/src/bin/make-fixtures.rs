//! Regenerates the bundled synthetic fixture corpus under
//! `fixtures/synthetic/`: a 10-day news corpus, matching prices and TED
//! series, and a scripted reply file recorded from a deterministic rule-table
//! backend.
//!
//! Rerun after any prompt template change — fixture digests are keyed on the
//! rendered prompts and are expected to break when prompts change:
//!
//! ```text
//! cargo run -p crashgraph --bin make-fixtures
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crashgraph::config::resolve_portfolio;
use crashgraph::data::parse_corpus;
use crashgraph::error::Result;
use crashgraph::eval::{
    run_prediction_phase, ExperimentParams, ExperimentSetup, PipelineVariant, RunKind,
};
use crashgraph::llm::scripted::{write_fixture_file, RecordingBackend};
use crashgraph::llm::{BaselineVariant, ChatBackend, MockBackend, PredictionMode};

fn day(n: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2007, 6, n).unwrap()
}

/// (id, day, headline, body)
const ARTICLES: &[(&str, u32, &str, &str)] = &[
    ("a01", 4, "Major mortgage lender halts new loans",
     "One of the largest home lenders stopped writing new mortgages amid rising defaults."),
    ("a02", 5, "Subprime defaults climb to record",
     "Delinquencies on risky home loans reached their highest level in a decade."),
    ("a03", 6, "Crude oil rallies on supply fears",
     "Oil futures jumped after refinery outages and tighter inventories."),
    ("a04", 7, "Housing starts collapse in May",
     "New residential construction fell sharply as builders pulled back."),
    ("a05", 8, "Banks tighten interbank lending",
     "Money-market desks reported banks growing wary of lending to each other."),
    ("a06", 11, "Hedge fund freezes redemptions on mortgage losses",
     "A leveraged credit fund suspended withdrawals after losses on mortgage securities."),
    ("a07", 11, "Regulators probe lending standards",
     "Supervisors opened reviews into underwriting practices at several lenders."),
    ("a08", 12, "Tech firms warn on enterprise demand",
     "Large software vendors flagged slowing corporate orders."),
    ("a09", 13, "Mining giants report record exports",
     "Bulk commodity shipments hit new highs on Asian demand."),
    ("a10", 14, "Bond yields spike as investors flee risk",
     "Corporate spreads widened sharply in a broad flight to quality."),
    ("a11", 15, "Drugmaker wins approval for new treatment",
     "A blockbuster therapy cleared its final regulatory hurdle."),
    ("a12", 15, "Consulting firms see contract slowdown",
     "IT services providers reported delayed client signings."),
];

/// Daily portfolio returns (applied identically to every member); crashes at
/// -2.5%, -3.1%, and -2.1% keep a safe margin from the -2% boundary so the
/// labels cannot flip on rounding.
const RETURNS: &[(u32, f64)] = &[
    (4, 0.004),
    (5, 0.010),
    (6, -0.008),
    (7, 0.002),
    (8, -0.012),
    (11, -0.025),
    (12, -0.031),
    (13, 0.004),
    (14, -0.006),
    (15, -0.021),
    (18, 0.003),
];

/// TED spread (percentage points); crisis label is strictly above 0.48.
const TED: &[(u32, f64)] = &[
    (1, 0.30),
    (4, 0.31),
    (5, 0.33),
    (6, 0.34),
    (7, 0.38),
    (8, 0.40),
    (11, 0.46),
    (12, 0.49),
    (13, 0.52),
    (14, 0.55),
    (15, 0.47),
    (18, 0.50),
];

/// Brainstorm rules shared by both modes: article headline markers resolve to
/// first-level entities.
fn article_rules(mock: MockBackend) -> MockBackend {
    mock.rule("mortgage lender halts", &[("mortgage industry", "lenders exposed to defaults")])
        .rule("Subprime defaults climb", &[
            ("mortgage industry", "loss rates rising"),
            ("subprime lenders", "balance sheets deteriorate"),
        ])
        .rule("Crude oil rallies", &[("oil prices", "energy costs climb")])
        .rule("Housing starts collapse", &[("u.s. housing market", "construction demand falls")])
        .rule("Banks tighten interbank", &[("credit markets", "funding costs rise")])
        .rule("freezes redemptions", &[
            ("mortgage industry", "mark-to-market losses spread"),
            ("hedge funds", "forced deleveraging"),
        ])
        .rule("Regulators probe", &[
            ("subprime lenders", "origination volumes fall"),
            ("credit markets", "risk premia widen"),
        ])
        .rule("Tech firms warn", &[("tech sector", "enterprise budgets cut")])
        .rule("Mining giants", &[("mining exports", "shipment volumes surge")])
        .rule("Bond yields spike", &[
            ("corporate bond market", "issuance stalls"),
            ("credit markets", "spreads widen"),
        ])
        .rule("Drugmaker wins approval", &[("drug approvals", "new revenue stream")])
        .rule("Consulting firms", &[("it consulting", "bookings slip")])
}

/// Entity expansion rules that terminate at portfolio stocks.
fn stock_mock() -> MockBackend {
    let mock = article_rules(MockBackend::new())
        .rule("mortgage industry", &[
            ("u.s. housing market", "home demand falls"),
            ("subprime lenders", "funding dries up"),
        ])
        .rule("u.s. housing market", &[
            ("consumer spending", "wealth effect fades"),
            ("credit markets", "collateral values fall"),
        ])
        .rule("consumer spending", &[
            ("Apple Inc.", "discretionary electronics demand"),
            ("Toyota Motor Corporation", "vehicle purchases deferred"),
        ])
        .rule("credit markets", &[("global banking sector", "funding stress spreads")])
        .rule("global banking sector", &[
            ("Royal Bank of Canada", "trading and credit exposure"),
            ("HDFC Bank Limited", "emerging-market funding costs"),
        ])
        .rule("subprime lenders", &[("hedge funds", "leveraged holders hit")])
        .rule("oil prices", &[
            ("TotalEnergies SE", "upstream margins improve"),
            ("shipping industry", "bunker fuel costs climb"),
        ])
        .rule("shipping industry", &[("auto industry", "logistics costs rise")])
        .rule("auto industry", &[("Toyota Motor Corporation", "input costs squeeze margins")])
        .rule("tech sector", &[
            ("SAP SE", "license revenue at risk"),
            ("semiconductor supply", "orders rescheduled"),
        ])
        .rule("semiconductor supply", &[("Apple Inc.", "component pipeline tightens")])
        .rule("mining exports", &[("BHP Group Limited", "record bulk volumes")])
        .rule("corporate bond market", &[("global banking sector", "underwriting losses")])
        .rule("drug approvals", &[("AstraZeneca PLC", "pipeline value rises")])
        .rule("it consulting", &[("Accenture PLC", "contract pipeline weakens")]);
    // "hedge funds" has no rule on purpose: the mock answers prose, the
    // parser rejects it, and the entity stays a stored partial chain.
    mock.verdict(day(5), true)
        .verdict(day(8), true)
        .verdict(day(11), true)
}

/// Entity expansion rules that terminate at regional economies.
fn macro_mock() -> MockBackend {
    article_rules(MockBackend::new())
        .rule("mortgage industry", &[
            ("u.s. housing market", "home demand falls"),
            ("American economy", "construction and finance drag"),
        ])
        .rule("u.s. housing market", &[("American economy", "residential investment slumps")])
        .rule("subprime lenders", &[("credit markets", "losses propagate")])
        .rule("credit markets", &[("global banking sector", "funding stress spreads")])
        .rule("global banking sector", &[
            ("American economy", "credit contraction"),
            ("European economy", "interbank exposure"),
        ])
        .rule("oil prices", &[
            ("Asian economy", "import bills rise"),
            ("shipping industry", "freight costs climb"),
        ])
        .rule("shipping industry", &[("Australian economy", "export logistics strained")])
        .rule("tech sector", &[("Asian economy", "electronics exports slow")])
        .rule("mining exports", &[
            ("Australian economy", "terms of trade improve"),
            ("African economy", "commodity revenues rise"),
        ])
        .rule("corporate bond market", &[("global banking sector", "underwriting losses")])
        .rule("drug approvals", &[("European economy", "pharma exports rise")])
        .rule("it consulting", &[("European economy", "services demand softens")])
        .probability(day(4), 0.1)
        .probability(day(5), 0.15)
        .probability(day(6), 0.1)
        .probability(day(7), 0.2)
        .probability(day(8), 0.3)
        .probability(day(11), 0.7)
        .probability(day(12), 0.8)
        .probability(day(13), 0.75)
        .probability(day(14), 0.65)
        .probability(day(15), 0.6)
}

fn corpus_jsonl() -> String {
    let mut out = String::new();
    for (id, d, headline, body) in ARTICLES {
        out.push_str(&format!(
            "{}\n",
            serde_json::json!({
                "id": id,
                "date": day(*d),
                "headline": headline,
                "body": body,
            })
        ));
    }
    out
}

fn prices_csv() -> String {
    let tickers =
        ["AAPL", "RY", "NTES", "HDB", "AZN", "TTE", "SAP", "TM", "BHP", "ACN"];
    let mut out = String::from("date,ticker,close\n");
    for ticker in tickers {
        let mut close = 100.0f64;
        out.push_str(&format!("{},{},{}\n", day(1), ticker, close));
        for (d, ret) in RETURNS {
            close *= 1.0 + ret;
            out.push_str(&format!("{},{},{}\n", day(*d), ticker, close));
        }
    }
    out
}

fn ted_csv() -> String {
    let mut out = String::from("date,spread\n");
    for (d, spread) in TED {
        out.push_str(&format!("{},{}\n", day(*d), spread));
    }
    out
}

fn record_runs(out: &mut BTreeMap<String, String>, dir: &Path) -> Result<()> {
    let corpus = parse_corpus(&std::fs::read_to_string(dir.join("corpus.jsonl"))?)?;
    let country = resolve_portfolio("country_neutral")?;
    let economies = resolve_portfolio("economies")?;
    let ted = crashgraph::data::load_ted(&dir.join("ted.csv"))?;

    let stock = stock_mock();
    let recording = RecordingBackend::new(&stock);
    {
        let base = ExperimentParams { repeats: 1, ..ExperimentParams::default() };
        let mut setups: Vec<(RunKind, ExperimentParams)> = vec![
            (RunKind::Pipeline(PipelineVariant::Full), base.clone()),
            (RunKind::Pipeline(PipelineVariant::NoTemporal), base.clone()),
            (RunKind::Pipeline(PipelineVariant::NoDecay), base.clone()),
            (RunKind::Baseline(BaselineVariant::Io), base.clone()),
            (RunKind::Baseline(BaselineVariant::Cot), base.clone()),
        ];
        for lambda in [0.1, 0.5, 1.0, 2.0, 10.0, 1e9] {
            setups.push((
                RunKind::Pipeline(PipelineVariant::Full),
                ExperimentParams { lambda, ..base.clone() },
            ));
        }
        for q in 1..=12 {
            setups.push((
                RunKind::Pipeline(PipelineVariant::Full),
                ExperimentParams { q, ..base.clone() },
            ));
        }
        for (kind, params) in setups {
            let setup = ExperimentSetup {
                corpus: &corpus,
                portfolio: &country,
                backend: &recording,
                mode: PredictionMode::Binary,
                ted: None,
                params,
                kind,
            };
            run_prediction_phase(&setup)?;
        }
    }
    out.append(&mut recording.into_recorded());

    let macro_backend = macro_mock();
    let recording = RecordingBackend::new(&macro_backend);
    {
        let setup = ExperimentSetup {
            corpus: &corpus,
            portfolio: &economies,
            backend: &recording,
            mode: PredictionMode::Probability,
            ted: Some(&ted),
            params: ExperimentParams { repeats: 1, ..ExperimentParams::default() },
            kind: RunKind::Pipeline(PipelineVariant::Full),
        };
        run_prediction_phase(&setup)?;
    }
    out.append(&mut recording.into_recorded());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic")
    });
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("corpus.jsonl"), corpus_jsonl())?;
    std::fs::write(dir.join("prices.csv"), prices_csv())?;
    std::fs::write(dir.join("ted.csv"), ted_csv())?;

    let mut recorded = BTreeMap::new();
    record_runs(&mut recorded, &dir)?;
    write_fixture_file(&dir.join("replies.jsonl"), &recorded)?;
    println!(
        "{}: corpus.jsonl prices.csv ted.csv replies.jsonl ({} scripted entries)",
        dir.display(),
        recorded.len()
    );
    Ok(())
}
