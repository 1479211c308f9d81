//! Run configuration: defaults, TOML config files with environment-variable
//! interpolation, backend selection, and the bundled portfolio fixtures.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::domain::Portfolio;
use crate::error::{Error, Result};
use crate::eval::ExperimentParams;
use crate::llm::{ChatBackend, HttpBackend, HttpConfig, ScriptedBackend};

pub const COUNTRY_NEUTRAL_JSON: &str = include_str!("../fixtures/portfolios/country_neutral.json");
pub const SECTOR_NEUTRAL_JSON: &str = include_str!("../fixtures/portfolios/sector_neutral.json");
pub const ECONOMIES_JSON: &str = include_str!("../fixtures/portfolios/economies.json");

/// Resolve a portfolio argument: one of the bundled fixture names
/// (`country_neutral`, `sector_neutral`, `economies`) or a path to a JSON
/// file of the same shape.
pub fn resolve_portfolio(name_or_path: &str) -> Result<Portfolio> {
    match name_or_path {
        "country_neutral" => Portfolio::from_json(COUNTRY_NEUTRAL_JSON),
        "sector_neutral" => Portfolio::from_json(SECTOR_NEUTRAL_JSON),
        "economies" => Portfolio::from_json(ECONOMIES_JSON),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("portfolio {path}: {e}")))?;
            Portfolio::from_json(&text)
        }
    }
}

/// Which transport serves chat completions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendKind {
    /// Fixture playback: `scripted:<path>`.
    Scripted { fixture: PathBuf },
    /// Live JSON-over-HTTP endpoint: `http:<url>`.
    Http { url: String },
}

impl BackendKind {
    pub fn parse(spec: &str) -> Result<BackendKind> {
        if let Some(path) = spec.strip_prefix("scripted:") {
            if path.is_empty() {
                return Err(Error::Config("scripted backend needs a fixture path".into()));
            }
            return Ok(BackendKind::Scripted { fixture: PathBuf::from(path) });
        }
        if let Some(url) = spec.strip_prefix("http:") {
            let url = url.to_string();
            if !url.starts_with("http://") && !url.starts_with("https://") {
                return Err(Error::Config(format!("backend url {url:?} is not well-formed")));
            }
            return Ok(BackendKind::Http { url });
        }
        Err(Error::Config(format!(
            "backend {spec:?} must be scripted:<path> or http:<url>"
        )))
    }

    pub fn build(&self, http: &HttpConfig) -> Result<Box<dyn ChatBackend>> {
        match self {
            BackendKind::Scripted { fixture } => {
                Ok(Box::new(ScriptedBackend::from_path(fixture)?))
            }
            BackendKind::Http { url } => {
                let cfg = HttpConfig { url: url.clone(), ..http.clone() };
                Ok(Box::new(HttpBackend::new(cfg)?))
            }
        }
    }
}

/// Raw config file contents. Every field is optional; CLI flags override.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub corpus: Option<String>,
    pub prices: Option<String>,
    pub ted: Option<String>,
    pub portfolio: Option<String>,
    pub backend: Option<String>,
    pub lambda: Option<f64>,
    pub q: Option<usize>,
    pub k: Option<usize>,
    pub max_iter: Option<usize>,
    pub damping: Option<f64>,
    pub repeats: Option<usize>,
    pub mode: Option<String>,
    pub ablate: Option<String>,
    pub baseline: Option<String>,
    pub out: Option<String>,
    pub crash_threshold: Option<f64>,
    pub percentile: Option<f64>,
    pub crisis_threshold: Option<f64>,
    pub label_top: Option<usize>,
    #[serde(default)]
    pub http: HttpSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpSection {
    pub model: Option<String>,
    pub auth_env: Option<String>,
    pub max_in_flight: Option<usize>,
    pub attempts: Option<u32>,
    pub backoff_ms: Option<u64>,
    pub timeout_secs: Option<u64>,
}

impl HttpSection {
    pub fn to_http_config(&self) -> HttpConfig {
        let defaults = HttpConfig::default();
        HttpConfig {
            url: String::new(),
            model: self.model.clone().unwrap_or(defaults.model),
            auth_env: self.auth_env.clone(),
            max_in_flight: self.max_in_flight.unwrap_or(defaults.max_in_flight),
            attempts: self.attempts.unwrap_or(defaults.attempts),
            backoff_ms: self.backoff_ms.unwrap_or(defaults.backoff_ms),
            timeout_secs: self.timeout_secs.unwrap_or(defaults.timeout_secs),
        }
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<FileConfig> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        let mut value = toml::Value::Table(table);
        interpolate_env(&mut value)?;
        value.try_into().map_err(|e| Error::Config(format!("config shape error: {e}")))
    }
}

/// Replace `${VAR}` in every string value with the named environment
/// variable. Unset variables are an error so missing secrets fail fast.
fn interpolate_env(value: &mut toml::Value) -> Result<()> {
    match value {
        toml::Value::String(s) => {
            *s = interpolate_str(s)?;
            Ok(())
        }
        toml::Value::Table(table) => {
            for (_, v) in table.iter_mut() {
                interpolate_env(v)?;
            }
            Ok(())
        }
        toml::Value::Array(items) => {
            for v in items.iter_mut() {
                interpolate_env(v)?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn interpolate_str(input: &str) -> Result<String> {
    let mut out = String::with_capacity(input.len());
    let mut rest = input;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let Some(end) = after.find('}') else {
            return Err(Error::Config(format!("unterminated ${{...}} in {input:?}")));
        };
        let name = &after[..end];
        let value = std::env::var(name)
            .map_err(|_| Error::Config(format!("environment variable {name} is not set")))?;
        out.push_str(&value);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Fully resolved run configuration with the pinned defaults: lambda 1, q 6,
/// repeats 5, temperature 0.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub prices: Option<PathBuf>,
    pub ted: Option<PathBuf>,
    pub portfolio: String,
    pub backend: BackendKind,
    pub params: ExperimentParams,
    pub mode: String,
    pub ablate: Option<String>,
    pub baseline: Option<String>,
    pub out: Option<PathBuf>,
    pub crash_threshold: f64,
    pub percentile: Option<f64>,
    pub crisis_threshold: f64,
    pub label_top: usize,
    pub http: HttpConfig,
}
