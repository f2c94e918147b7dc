//! Agent backends: remote chat API, simulated utility voter, record/replay cache.

mod cache;
mod mock;
mod ratelimit;
mod remote;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompting::PromptBundle;

pub use cache::{cache_key, CacheRecord, CacheStore, CachedBackend};
pub use mock::{
    allocate_points, importance_level, mock_select, utility, MockBackend, MockScales, MockVoterProfile,
    CUMULATIVE_PICKS,
};
pub use ratelimit::TokenBucket;
pub use remote::{
    RemoteBackend, RemoteConfig, RetryPolicy, DEFAULT_API_BASE, DEFAULT_MODEL, ENV_API_BASE, ENV_API_KEY, ENV_MODEL,
};

/// Temperature sweep bounds.
pub const MAX_TEMPERATURE: f64 = 2.0;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("remote backend unavailable after {attempts} attempt(s): {message}")]
    RemoteUnavailable { attempts: u32, message: String },
    #[error("no cached response for key {0}")]
    CacheMiss(String),
    #[error("environment variable {0} is not set")]
    CredentialMissing(&'static str),
    #[error("invalid agent parameters: {0}")]
    InvalidParams(String),
    #[error("cache file {path}: {source}")]
    Cache { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Remote,
    Mock,
    Replay,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "remote" => Ok(BackendKind::Remote),
            "mock" => Ok(BackendKind::Mock),
            "replay" => Ok(BackendKind::Replay),
            other => Err(format!("unknown backend {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub temperature: f64,
    pub seed: u64,
    pub model_name: String,
    pub agent_index: usize,
}

impl AgentParams {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(0.0..=MAX_TEMPERATURE).contains(&self.temperature) {
            return Err(AgentError::InvalidParams(format!(
                "temperature {} outside [0, {MAX_TEMPERATURE}]",
                self.temperature
            )));
        }
        Ok(())
    }
}

mod duration_ms {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

/// An agent reply, kept verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawResponse {
    pub text: String,
    /// Reply to the reflection turn, when one was asked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thought: Option<String>,
    /// Digest of the bundle this answers.
    pub turns_echo: String,
    #[serde(rename = "latency_ms", with = "duration_ms")]
    pub latency: Duration,
    pub backend: BackendKind,
}

/// Uniform agent contract. Implementations are shared across worker threads.
pub trait AgentBackend: Send + Sync {
    fn kind(&self) -> BackendKind;

    fn chat(&self, bundle: &PromptBundle, params: &AgentParams) -> Result<RawResponse, AgentError>;
}

impl<T: AgentBackend + ?Sized> AgentBackend for std::sync::Arc<T> {
    fn kind(&self) -> BackendKind {
        (**self).kind()
    }

    fn chat(&self, bundle: &PromptBundle, params: &AgentParams) -> Result<RawResponse, AgentError> {
        (**self).chat(bundle, params)
    }
}

impl<T: AgentBackend + ?Sized> AgentBackend for Box<T> {
    fn kind(&self) -> BackendKind {
        (**self).kind()
    }

    fn chat(&self, bundle: &PromptBundle, params: &AgentParams) -> Result<RawResponse, AgentError> {
        (**self).chat(bundle, params)
    }
}
