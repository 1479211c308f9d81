//! Crate-wide error type.

use chrono::NaiveDate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("entity {raw:?} is empty after normalization")]
    EmptyEntity { raw: String },

    #[error("self-loop edge on {key:?} rejected")]
    SelfLoop { key: String },

    #[error("invalid portfolio: {0}")]
    InvalidPortfolio(String),

    #[error("corpus line {line}: {reason}")]
    Corpus { line: usize, reason: String },

    #[error("duplicate article id {0:?}")]
    DuplicateArticleId(String),

    #[error("failed to parse {what} from model output: {raw:?}")]
    Parse { what: &'static str, raw: String },

    #[error("scripted fixture has no entry for digest {digest} (prompt starts: {preview:?})")]
    FixtureMiss { digest: String, preview: String },

    #[error("transport failure: {0}")]
    Transport(String),

    #[error("backend returned HTTP {status}: {body}")]
    Http { status: u16, body: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("memory store rejected: {0}")]
    MemoryStore(String),

    #[error("snapshot format version {found} is newer than supported version {supported}")]
    SnapshotVersion { found: u32, supported: u32 },

    #[error("snapshot unreadable: {0}")]
    Snapshot(String),

    #[error("edge day {edge_day} is after the current day {today}")]
    EdgeFromFuture { edge_day: NaiveDate, today: NaiveDate },

    #[error("run failed: {0}")]
    RunFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
