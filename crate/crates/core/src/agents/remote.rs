//! OpenAI-compatible chat-completions client.

use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{AgentBackend, AgentError, AgentParams, BackendKind, RawResponse, TokenBucket};
use crate::prompting::{PromptBundle, Role, Turn};

pub const ENV_API_BASE: &str = "PBVOTE_API_BASE";
pub const ENV_API_KEY: &str = "PBVOTE_API_KEY";
pub const ENV_MODEL: &str = "PBVOTE_MODEL";

pub const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";
pub const DEFAULT_MODEL: &str = "gpt-4o-mini";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    /// Doubled after every failed attempt.
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            initial_backoff: Duration::from_secs(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub api_base: String,
    pub api_key: String,
    pub model: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    /// Requests per second across all workers.
    pub rate_limit: f64,
}

impl RemoteConfig {
    /// Reads the key (required), base URL and model from the environment.
    pub fn from_env() -> Result<Self, AgentError> {
        let api_key = std::env::var(ENV_API_KEY)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or(AgentError::CredentialMissing(ENV_API_KEY))?;
        Ok(Self {
            api_base: std::env::var(ENV_API_BASE).unwrap_or_else(|_| DEFAULT_API_BASE.to_string()),
            api_key,
            model: std::env::var(ENV_MODEL).unwrap_or_else(|_| DEFAULT_MODEL.to_string()),
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
            rate_limit: 5.0,
        })
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    bucket: TokenBucket,
}

enum Failure {
    Retryable(String),
    Fatal(String),
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, AgentError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| AgentError::RemoteUnavailable {
                attempts: 0,
                message: e.to_string(),
            })?;
        let bucket = TokenBucket::new(config.rate_limit.ceil().max(1.0) as u32, config.rate_limit);
        Ok(Self { config, client, bucket })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn model<'a>(&'a self, params: &'a AgentParams) -> &'a str {
        if params.model_name.is_empty() {
            &self.config.model
        } else {
            &params.model_name
        }
    }

    fn post_once(&self, body: &Value) -> Result<String, Failure> {
        self.bucket.acquire();
        let url = format!("{}/chat/completions", self.config.api_base.trim_end_matches('/'));
        let resp = self
            .client
            .post(url)
            .bearer_auth(&self.config.api_key)
            .json(body)
            .send()
            .map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Failure::Retryable(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Failure::Retryable(format!("HTTP {status}: {text}")));
        }
        if !status.is_success() {
            return Err(Failure::Fatal(format!("HTTP {status}: {text}")));
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| Failure::Fatal(format!("bad JSON: {e}")))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Failure::Fatal("response has no choices[0].message.content".into()))
    }

    fn complete(&self, messages: &[Value], params: &AgentParams) -> Result<String, AgentError> {
        let body = json!({
            "model": self.model(params),
            "messages": messages,
            "temperature": params.temperature,
        });
        let mut backoff = self.config.retry.initial_backoff;
        let attempts = self.config.retry.attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.post_once(&body) {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(message)) => {
                    return Err(AgentError::RemoteUnavailable {
                        attempts: attempt,
                        message,
                    })
                }
                Err(Failure::Retryable(message)) => {
                    log::warn!("attempt {attempt}/{attempts} failed: {message}");
                    last = message;
                    if attempt < attempts {
                        std::thread::sleep(backoff);
                        backoff *= 2;
                    }
                }
            }
        }
        Err(AgentError::RemoteUnavailable {
            attempts,
            message: last,
        })
    }
}

fn message(turn: &Turn) -> Value {
    let role = match turn.role {
        Role::System => "system",
        Role::User => "user",
    };
    json!({ "role": role, "content": turn.text })
}

impl AgentBackend for RemoteBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Remote
    }

    /// With a reflection turn the conversation takes two calls: the first
    /// reply becomes the thought and is fed back before the voting turn.
    fn chat(&self, bundle: &PromptBundle, params: &AgentParams) -> Result<RawResponse, AgentError> {
        params.validate()?;
        let start = Instant::now();
        let mut messages = vec![message(bundle.initial_context())];
        let thought = match bundle.reflection_turn() {
            Some(turn) => {
                messages.push(message(turn));
                let reply = self.complete(&messages, params)?;
                messages.push(json!({ "role": "assistant", "content": reply }));
                Some(reply)
            }
            None => None,
        };
        messages.push(message(bundle.voting_turn()));
        let text = self.complete(&messages, params)?;
        Ok(RawResponse {
            text,
            thought,
            turns_echo: bundle.digest(),
            latency: start.elapsed(),
            backend: BackendKind::Remote,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{apply_list_treatment, ListTreatment, ProjectCatalog};
    use crate::prompting::{PromptTemplates, VotingMethod};
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::{Arc, Mutex};

    /// Serves the canned `(status, body)` replies in order, recording request bodies.
    fn serve(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Value>>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = seen.clone();
        std::thread::spawn(move || {
            for (status, body) in replies {
                let Ok((stream, _)) = listener.accept() else { return };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap_or(0);
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                log.lock()
                    .unwrap()
                    .push(serde_json::from_slice(&buf).unwrap_or(Value::Null));
                let mut stream = stream;
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
            }
        });
        (format!("http://{addr}"), seen)
    }

    fn ok(content: &str) -> (u16, String) {
        (
            200,
            json!({ "choices": [{ "message": { "content": content } }] }).to_string(),
        )
    }

    fn backend(base: String) -> RemoteBackend {
        RemoteBackend::new(RemoteConfig {
            api_base: base,
            api_key: "test-key".into(),
            model: "m".into(),
            timeout: Duration::from_secs(5),
            retry: RetryPolicy {
                attempts: 3,
                initial_backoff: Duration::from_millis(5),
            },
            rate_limit: 1000.0,
        })
        .unwrap()
    }

    fn bundle(cot: bool) -> PromptBundle {
        let list = apply_list_treatment(&ProjectCatalog::builtin(), ListTreatment::Original);
        PromptTemplates::default()
            .assemble(None, VotingMethod::K_APPROVAL, &list, cot)
            .unwrap()
    }

    fn params() -> AgentParams {
        AgentParams {
            temperature: 0.5,
            seed: 1,
            model_name: "test-model".into(),
            agent_index: 0,
        }
    }

    #[test]
    fn single_call() {
        let (base, seen) = serve(vec![ok("#1, #2, #3, #4, #5")]);
        let r = backend(base).chat(&bundle(false), &params()).unwrap();
        assert_eq!(r.text, "#1, #2, #3, #4, #5");
        assert_eq!(r.backend, BackendKind::Remote);
        let req = &seen.lock().unwrap()[0];
        assert_eq!(req["model"], "test-model");
        assert_eq!(req["temperature"], 0.5);
        assert_eq!(req["messages"].as_array().unwrap().len(), 2);
        assert_eq!(req["messages"][0]["role"], "system");
    }

    #[test]
    fn reflection_takes_two_calls() {
        let (base, seen) = serve(vec![ok("I like parks."), ok("#1")]);
        let r = backend(base).chat(&bundle(true), &params()).unwrap();
        assert_eq!(r.thought.as_deref(), Some("I like parks."));
        assert_eq!(r.text, "#1");
        let reqs = seen.lock().unwrap();
        let second = reqs[1]["messages"].as_array().unwrap();
        assert_eq!(second.len(), 4);
        assert_eq!(second[2]["role"], "assistant");
        assert_eq!(second[2]["content"], "I like parks.");
    }

    #[test]
    fn retries_transient_errors() {
        let (base, seen) = serve(vec![(503, "{}".into()), (429, "{}".into()), ok("#7")]);
        let r = backend(base).chat(&bundle(false), &params()).unwrap();
        assert_eq!(r.text, "#7");
        assert_eq!(seen.lock().unwrap().len(), 3);
    }

    #[test]
    fn gives_up_after_budget() {
        let (base, _) = serve(vec![(500, "{}".into()); 3]);
        match backend(base).chat(&bundle(false), &params()) {
            Err(AgentError::RemoteUnavailable { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (base, seen) = serve(vec![(401, "{}".into()), ok("#1")]);
        match backend(base).chat(&bundle(false), &params()) {
            Err(AgentError::RemoteUnavailable { attempts, .. }) => assert_eq!(attempts, 1),
            other => panic!("{other:?}"),
        }
        assert_eq!(seen.lock().unwrap().len(), 1);
    }

    #[test]
    fn unreachable_host() {
        // Bind and drop to get a port nobody listens on.
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let err = backend(format!("http://127.0.0.1:{port}"))
            .chat(&bundle(false), &params())
            .unwrap_err();
        assert!(matches!(err, AgentError::RemoteUnavailable { attempts: 3, .. }));
    }
}
