//! Fixture-driven chat backend for deterministic runs and tests.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::{request_digest, ChatBackend, ChatRequest};

/// One line of a scripted fixture file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub digest: String,
    pub response_text: String,
}

/// Replays recorded responses keyed by the request digest. A lookup miss is a
/// hard error: a silent empty reply would let a test pass while exercising
/// nothing.
pub struct ScriptedBackend {
    entries: BTreeMap<String, String>,
    source: String,
}

impl ScriptedBackend {
    pub fn from_path(path: &Path) -> Result<ScriptedBackend> {
        let file = std::fs::File::open(path).map_err(|e| {
            Error::Config(format!("scripted fixture {}: {e}", path.display()))
        })?;
        let mut entries = BTreeMap::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: FixtureRecord = serde_json::from_str(&line).map_err(|e| {
                Error::Config(format!(
                    "scripted fixture {} line {}: {e}",
                    path.display(),
                    idx + 1
                ))
            })?;
            entries.insert(record.digest, record.response_text);
        }
        Ok(ScriptedBackend { entries, source: path.display().to_string() })
    }

    pub fn from_entries<I>(entries: I) -> ScriptedBackend
    where
        I: IntoIterator<Item = (String, String)>,
    {
        ScriptedBackend {
            entries: entries.into_iter().collect(),
            source: "<inline>".to_string(),
        }
    }

    /// Convenience for tests: key a response by the request it answers.
    pub fn insert(&mut self, request: &ChatRequest, response: impl Into<String>) {
        self.entries.insert(request_digest(request), response.into());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String> {
        let digest = request_digest(request);
        match self.entries.get(&digest) {
            Some(text) => Ok(text.clone()),
            None => {
                let preview: String =
                    request.joined_text().chars().take(96).collect::<String>().replace('\n', " ");
                Err(Error::FixtureMiss { digest, preview })
            }
        }
    }

    fn describe(&self) -> String {
        format!("scripted:{}", self.source)
    }
}

/// Writes fixture records sorted by digest so regenerated files diff cleanly.
pub fn write_fixture_file(path: &Path, entries: &BTreeMap<String, String>) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    for (digest, response_text) in entries {
        let record = FixtureRecord {
            digest: digest.clone(),
            response_text: response_text.clone(),
        };
        writeln!(out, "{}", serde_json::to_string(&record)?)?;
    }
    Ok(())
}

/// Wraps another backend and records every exchange, keyed by digest. Used by
/// the fixture generator to capture a scripted corpus from a rule-driven run.
pub struct RecordingBackend<'a> {
    inner: &'a dyn ChatBackend,
    recorded: Mutex<BTreeMap<String, String>>,
}

impl<'a> RecordingBackend<'a> {
    pub fn new(inner: &'a dyn ChatBackend) -> RecordingBackend<'a> {
        RecordingBackend { inner, recorded: Mutex::new(BTreeMap::new()) }
    }

    pub fn into_recorded(self) -> BTreeMap<String, String> {
        self.recorded.into_inner().expect("recording mutex poisoned")
    }
}

impl ChatBackend for RecordingBackend<'_> {
    fn complete(&self, request: &ChatRequest) -> Result<String> {
        let response = self.inner.complete(request)?;
        self.recorded
            .lock()
            .expect("recording mutex poisoned")
            .insert(request_digest(request), response.clone());
        Ok(response)
    }

    fn describe(&self) -> String {
        format!("recording({})", self.inner.describe())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(text: &str) -> ChatRequest {
        ChatRequest::new("m").user(text)
    }

    #[test]
    fn lookup_replays_the_exact_fixture_text() {
        let req = request("d");
        let mut backend = ScriptedBackend::from_entries([]);
        backend.insert(&req, "1. Mortgage industry | lenders exposed");
        assert_eq!(
            backend.complete(&req).unwrap(),
            "1. Mortgage industry | lenders exposed"
        );
    }

    #[test]
    fn identical_requests_get_identical_responses() {
        let mut backend = ScriptedBackend::from_entries([]);
        backend.insert(&request("same"), "stable");
        let a = backend.complete(&request("same")).unwrap();
        let b = backend.complete(&request("same")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_digest_fails_loudly() {
        let backend = ScriptedBackend::from_entries([]);
        let err = backend.complete(&request("unknown")).unwrap_err();
        assert!(matches!(err, Error::FixtureMiss { .. }), "got {err}");
    }

    #[test]
    fn fixture_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("replies.jsonl");
        let req = request("hello");
        let mut entries = BTreeMap::new();
        entries.insert(super::super::request_digest(&req), "world".to_string());
        write_fixture_file(&path, &entries).unwrap();

        let backend = ScriptedBackend::from_path(&path).unwrap();
        assert_eq!(backend.complete(&req).unwrap(), "world");
    }

    #[test]
    fn loading_a_missing_file_is_an_error() {
        assert!(ScriptedBackend::from_path(Path::new("/nonexistent/replies.jsonl")).is_err());
    }
}
