//! Append-only JSONL response cache, used for record and replay.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::{AgentBackend, AgentError, AgentParams, BackendKind, RawResponse};
use crate::prompting::PromptBundle;

/// SHA-256 over the bundle, model name, temperature and agent index.
pub fn cache_key(bundle: &PromptBundle, params: &AgentParams) -> String {
    let canonical = json!({
        "bundle": bundle,
        "model_name": params.model_name,
        "temperature": params.temperature,
        "agent_index": params.agent_index,
    });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub request: serde_json::Value,
    pub response_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thought: Option<String>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

pub struct CacheStore {
    path: PathBuf,
    entries: RwLock<HashMap<String, CacheRecord>>,
    sink: Mutex<File>,
}

impl CacheStore {
    /// Opens (creating if needed) the cache at `path`. Later lines win over
    /// earlier ones with the same key; malformed lines are skipped.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, AgentError> {
        let path = path.as_ref().to_path_buf();
        let io_err = |source| AgentError::Cache {
            path: path.display().to_string(),
            source,
        };
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(io_err)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheRecord>(&line) {
                    Ok(rec) => {
                        entries.insert(rec.key.clone(), rec);
                    }
                    Err(e) => log::warn!("{}:{}: skipping bad cache line: {e}", path.display(), n + 1),
                }
            }
        }
        let sink = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err)?;
        Ok(Self {
            path,
            entries: RwLock::new(entries),
            sink: Mutex::new(sink),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<CacheRecord> {
        self.entries.read().unwrap_or_else(|e| e.into_inner()).get(key).cloned()
    }

    pub fn insert(&self, record: CacheRecord) -> Result<(), AgentError> {
        let line = serde_json::to_string(&record).expect("record serializes");
        {
            let mut sink = self.sink.lock().unwrap_or_else(|e| e.into_inner());
            writeln!(sink, "{line}")
                .and_then(|_| sink.flush())
                .map_err(|source| AgentError::Cache {
                    path: self.path.display().to_string(),
                    source,
                })?;
        }
        self.entries
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(record.key.clone(), record);
        Ok(())
    }
}

/// Serves hits from the cache and forwards misses to `inner`, recording the
/// reply. Without an inner backend, a miss is an error (pure replay).
pub struct CachedBackend {
    inner: Option<Box<dyn AgentBackend>>,
    store: CacheStore,
}

impl CachedBackend {
    pub fn new(inner: Option<Box<dyn AgentBackend>>, store: CacheStore) -> Self {
        Self { inner, store }
    }

    pub fn replay(store: CacheStore) -> Self {
        Self::new(None, store)
    }

    pub fn store(&self) -> &CacheStore {
        &self.store
    }
}

impl AgentBackend for CachedBackend {
    fn kind(&self) -> BackendKind {
        match &self.inner {
            Some(inner) => inner.kind(),
            None => BackendKind::Replay,
        }
    }

    fn chat(&self, bundle: &PromptBundle, params: &AgentParams) -> Result<RawResponse, AgentError> {
        let key = cache_key(bundle, params);
        if let Some(hit) = self.store.get(&key) {
            return Ok(RawResponse {
                text: hit.response_text,
                thought: hit.thought,
                turns_echo: bundle.digest(),
                latency: Duration::ZERO,
                backend: BackendKind::Replay,
            });
        }
        let Some(inner) = &self.inner else {
            return Err(AgentError::CacheMiss(key));
        };
        let response = inner.chat(bundle, params)?;
        self.store.insert(CacheRecord {
            key,
            request: json!({
                "bundle": bundle,
                "model_name": params.model_name,
                "temperature": params.temperature,
                "agent_index": params.agent_index,
            }),
            response_text: response.text.clone(),
            thought: response.thought.clone(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        })?;
        Ok(response)
    }
}
