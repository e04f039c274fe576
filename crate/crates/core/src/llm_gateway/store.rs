use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::{Completion, GatewayError, PromptRequest};
use crate::jsonl;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreEntry {
    pub fingerprint: String,
    pub request: PromptRequest,
    pub completion: Completion,
    pub recorded_at: String,
}

impl StoreEntry {
    pub fn new(fingerprint: String, request: PromptRequest, completion: Completion) -> Self {
        Self::at(fingerprint, request, completion, Utc::now())
    }

    pub fn at(fingerprint: String, request: PromptRequest, completion: Completion, when: DateTime<Utc>) -> Self {
        StoreEntry {
            fingerprint,
            request,
            completion,
            recorded_at: when.to_rfc3339_opts(SecondsFormat::Secs, true),
        }
    }
}

struct Inner {
    entries: BTreeMap<String, StoreEntry>,
    file: Option<File>,
}

/// Fingerprint-keyed transcript, optionally backed by a JSONL file.
///
/// New entries are appended as they arrive; a later line for the same
/// fingerprint wins on load. `compact` rewrites the file sorted and
/// deduplicated.
pub struct TranscriptStore {
    path: Option<PathBuf>,
    inner: Mutex<Inner>,
}

fn store_err(path: &Path, err: impl std::fmt::Display) -> GatewayError {
    GatewayError::Store(format!("{}: {err}", path.display()))
}

impl TranscriptStore {
    pub fn in_memory() -> Self {
        TranscriptStore {
            path: None,
            inner: Mutex::new(Inner {
                entries: BTreeMap::new(),
                file: None,
            }),
        }
    }

    /// Loads `path` if it exists; later inserts are appended to it.
    pub fn open(path: &Path) -> Result<Self, GatewayError> {
        let mut entries = BTreeMap::new();
        if path.exists() {
            let records: Vec<StoreEntry> = jsonl::read_jsonl(path).map_err(|e| store_err(path, e))?;
            for record in records {
                entries.insert(record.fingerprint.clone(), record);
            }
        }
        Ok(TranscriptStore {
            path: Some(path.to_path_buf()),
            inner: Mutex::new(Inner { entries, file: None }),
        })
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn get(&self, fingerprint: &str) -> Option<StoreEntry> {
        self.lock().entries.get(fingerprint).cloned()
    }

    pub fn insert(&self, entry: StoreEntry) -> Result<(), GatewayError> {
        let mut inner = self.lock();
        if let Some(path) = &self.path {
            if inner.file.is_none() {
                if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    fs::create_dir_all(parent).map_err(|e| store_err(path, e))?;
                }
                let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| store_err(path, e))?;
                inner.file = Some(file);
            }
            let line = serde_json::to_string(&entry).map_err(|e| store_err(path, e))?;
            let file = inner.file.as_mut().expect("opened above");
            writeln!(file, "{line}").map_err(|e| store_err(path, e))?;
        }
        inner.entries.insert(entry.fingerprint.clone(), entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lock().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> Vec<StoreEntry> {
        self.lock().entries.values().cloned().collect()
    }

    /// Rewrites the backing file: one line per fingerprint, sorted.
    pub fn compact(&self) -> Result<(), GatewayError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let mut inner = self.lock();
        inner.file = None;
        let records: Vec<&StoreEntry> = inner.entries.values().collect();
        let text = jsonl::to_jsonl(&records).map_err(|e| store_err(path, e))?;
        fs::write(path, text).map_err(|e| store_err(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm_gateway::{request_fingerprint, CompletionSource};

    fn entry(user: &str, text: &str) -> StoreEntry {
        let request = PromptRequest::new("s", user, "m");
        StoreEntry::new(
            request_fingerprint(&request),
            request,
            Completion {
                text: text.into(),
                usage: None,
                source: CompletionSource::Live,
            },
        )
    }

    #[test]
    fn one_entry_per_fingerprint() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let store = TranscriptStore::open(&path).unwrap();
        store.insert(entry("a", "first")).unwrap();
        store.insert(entry("a", "second")).unwrap();
        store.insert(entry("b", "x")).unwrap();
        assert_eq!(store.len(), 2);
        drop(store);
        let reopened = TranscriptStore::open(&path).unwrap();
        let fp = entry("a", "").fingerprint;
        assert_eq!(reopened.get(&fp).unwrap().completion.text, "second");
        reopened.compact().unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 2);
    }

    #[test]
    fn wire_format_has_expected_fields() {
        let line = serde_json::to_string(&entry("a", "t")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        for key in ["fingerprint", "request", "completion", "recorded_at"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(chrono::DateTime::parse_from_rfc3339(v["recorded_at"].as_str().unwrap()).is_ok());
    }
}
