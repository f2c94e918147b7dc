use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{io_err, json_err, ExperimentConfig, HarnessError};
use crate::agents::{
    AgentBackend, AgentError, AgentParams, BackendKind, CacheStore, CachedBackend, MockBackend, MockVoterProfile,
    RawResponse, RemoteBackend, RemoteConfig,
};
use crate::aggregation::tally;
use crate::catalog::{apply_list_treatment, load_catalog, ProjectCatalog};
use crate::parsing::{
    parse_ballot, read_ballots_jsonl, write_ballots_jsonl, Ballot, BallotRecord, ParseError, ParseReport,
};
use crate::persona::{build_persona, load_survey, SurveyRecord};
use crate::prompting::{PromptBundle, PromptTemplates};

/// One agent's reply as persisted in `responses.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub agent_index: usize,
    pub voter_id: String,
    pub response: RawResponse,
    pub report: ParseReport,
    /// Why the reply was discarded, if it was.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    /// Aborted on a backend failure; the run holds the replies before it.
    Failed {
        agent_index: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub config: ExperimentConfig,
    pub config_hash: String,
    /// Agent-index order.
    pub responses: Vec<ResponseRecord>,
    /// Parsed ballots in canonical ids, agent-index order.
    pub ballots: Vec<Ballot>,
    pub discarded: usize,
    pub status: RunStatus,
}

impl ExperimentRun {
    pub fn parse_reports(&self) -> impl Iterator<Item = &ParseReport> {
        self.responses.iter().map(|r| &r.report)
    }

    pub fn label(&self) -> String {
        self.config.label()
    }
}

#[derive(Serialize, Deserialize)]
struct StatusFile {
    label: String,
    config_hash: String,
    #[serde(flatten)]
    status: RunStatus,
    n_responses: usize,
    n_ballots: usize,
    discarded: usize,
}

struct Inputs {
    catalog: ProjectCatalog,
    survey: Vec<SurveyRecord>,
    bundles: Vec<PromptBundle>,
    voter_ids: Vec<String>,
}

fn read_file(path: &Path) -> Result<File, HarnessError> {
    File::open(path).map_err(io_err(path))
}

pub(crate) fn load_config_catalog(config: &ExperimentConfig) -> Result<ProjectCatalog, HarnessError> {
    Ok(match &config.catalog_path {
        Some(p) => load_catalog(read_file(p)?)?,
        None => ProjectCatalog::builtin(),
    })
}

/// The catalog a run was made against.
pub fn load_run_catalog(run: &ExperimentRun) -> Result<ProjectCatalog, HarnessError> {
    load_config_catalog(&run.config)
}

pub(crate) fn load_config_survey(config: &ExperimentConfig) -> Result<Vec<SurveyRecord>, HarnessError> {
    Ok(match &config.survey_path {
        Some(p) => load_survey(read_file(p)?)?,
        None => Vec::new(),
    })
}

fn prepare(config: &ExperimentConfig) -> Result<Inputs, HarnessError> {
    config.validate()?;
    let catalog = load_config_catalog(config)?;
    let survey = load_config_survey(config)?;
    if config.persona && survey.len() < config.n_agents {
        return Err(HarnessError::SurveyTooSmall {
            needed: config.n_agents,
            got: survey.len(),
        });
    }
    let templates = match &config.templates_dir {
        Some(dir) => PromptTemplates::load_dir(dir)?,
        None => PromptTemplates::default(),
    };
    let list = apply_list_treatment(&catalog, config.treatment);
    let mut bundles = Vec::with_capacity(config.n_agents);
    let mut voter_ids = Vec::with_capacity(config.n_agents);
    for i in 0..config.n_agents {
        if let Some(record) = survey.get(i).filter(|_| config.persona) {
            let persona = build_persona(record)?;
            bundles.push(templates.assemble(Some(&persona), config.method, &list, config.cot)?);
            voter_ids.push(record.participant_id.clone());
        } else {
            bundles.push(templates.assemble(None, config.method, &list, config.cot)?);
            voter_ids.push(format!("agent-{i:04}"));
        }
    }
    Ok(Inputs {
        catalog,
        survey,
        bundles,
        voter_ids,
    })
}

/// The backend a config asks for, without caching.
fn build_backend(
    config: &ExperimentConfig,
    catalog: &ProjectCatalog,
    survey: &[SurveyRecord],
) -> Result<Box<dyn AgentBackend>, HarnessError> {
    Ok(match config.backend {
        BackendKind::Mock => {
            let profiles = if config.persona {
                survey
                    .iter()
                    .take(config.n_agents)
                    .enumerate()
                    .map(|(i, r)| MockVoterProfile::from_record(r, &config.mock_scales, i as u64))
                    .collect()
            } else {
                Vec::new()
            };
            Box::new(MockBackend::new(catalog.clone(), profiles))
        }
        BackendKind::Remote => {
            let mut remote = RemoteConfig::from_env()?;
            remote.model = config.model.clone();
            Box::new(RemoteBackend::new(remote)?)
        }
        BackendKind::Replay => {
            let path = config.cache_path.as_ref().expect("validated");
            if !path.exists() {
                return Err(HarnessError::Io {
                    path: path.clone(),
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "cache file not found"),
                });
            }
            Box::new(CachedBackend::replay(CacheStore::open(path)?))
        }
    })
}

/// Calls the backend for every agent with at most `parallelism` calls in
/// flight, then parses in agent-index order. Stops dispatching after the
/// first backend error and keeps the replies before it.
fn execute(
    config: &ExperimentConfig,
    inputs: &Inputs,
    backend: &dyn AgentBackend,
) -> (ExperimentRun, Option<(usize, AgentError)>) {
    let n = config.n_agents;
    let slots: Vec<Mutex<Option<Result<RawResponse, AgentError>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    std::thread::scope(|scope| {
        for _ in 0..config.parallelism.clamp(1, n) {
            scope.spawn(|| loop {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let params = AgentParams {
                    temperature: config.temperature,
                    seed: config.seed,
                    model_name: config.model.clone(),
                    agent_index: i,
                };
                let result = backend.chat(&inputs.bundles[i], &params);
                if result.is_err() {
                    abort.store(true, Ordering::Relaxed);
                }
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(result);
            });
        }
    });

    let list = apply_list_treatment(&inputs.catalog, config.treatment);
    let mut run = ExperimentRun {
        config: config.clone(),
        config_hash: config.config_hash(),
        responses: Vec::with_capacity(n),
        ballots: Vec::with_capacity(n),
        discarded: 0,
        status: RunStatus::Complete,
    };
    let mut failure = None;
    for (i, slot) in slots.into_iter().enumerate() {
        let response = match slot.into_inner().unwrap_or_else(|e| e.into_inner()) {
            Some(Ok(r)) => r,
            Some(Err(e)) => {
                failure = Some((i, e));
                break;
            }
            None => break,
        };
        let voter_id = inputs.voter_ids[i].clone();
        let (report, parse_error) = match parse_ballot(&voter_id, config.method, &response.text, &list) {
            Ok((ballot, report)) => {
                run.ballots.push(ballot);
                (report, None)
            }
            Err(e) => {
                run.discarded += 1;
                log::debug!("agent {i}: discarded reply: {e}");
                let report = match &e {
                    ParseError::TooFewVotes { report, .. } => report.clone(),
                    _ => ParseReport::default(),
                };
                (report, Some(e.to_string()))
            }
        };
        run.responses.push(ResponseRecord {
            agent_index: i,
            voter_id,
            response,
            report,
            parse_error,
        });
    }
    if let Some((agent_index, e)) = &failure {
        run.status = RunStatus::Failed {
            agent_index: *agent_index,
            message: e.to_string(),
        };
    } else if run.responses.len() < n {
        // Only reachable if a worker panicked mid-call.
        run.status = RunStatus::Failed {
            agent_index: run.responses.len(),
            message: "agent call did not complete".into(),
        };
    }
    (run, failure)
}

fn finish(run: ExperimentRun, failure: Option<(usize, AgentError)>) -> Result<ExperimentRun, HarnessError> {
    match failure {
        Some((agent_index, source)) => Err(HarnessError::BackendFailure {
            agent_index,
            run_dir: None,
            source,
        }),
        None => Ok(run),
    }
}

/// Runs in memory with the backend named by the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRun, HarnessError> {
    let inputs = prepare(config)?;
    let backend = build_backend(config, &inputs.catalog, &inputs.survey)?;
    let (run, failure) = execute(config, &inputs, backend.as_ref());
    finish(run, failure)
}

/// Runs in memory against a caller-supplied backend.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    backend: &dyn AgentBackend,
) -> Result<ExperimentRun, HarnessError> {
    let inputs = prepare(config)?;
    let (run, failure) = execute(config, &inputs, backend);
    finish(run, failure)
}

fn new_run_dir(out_root: &Path, config_hash: &str) -> Result<PathBuf, HarnessError> {
    fs::create_dir_all(out_root).map_err(io_err(out_root))?;
    let millis = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let base = format!("run-{millis}-{}", &config_hash[..8]);
    for attempt in 0.. {
        let name = if attempt == 0 {
            base.clone()
        } else {
            format!("{base}-{attempt}")
        };
        let dir = out_root.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(io_err(&dir)(e)),
        }
    }
    unreachable!()
}

fn write_run_files(run: &ExperimentRun, dir: &Path, catalog: &ProjectCatalog) -> Result<(), HarnessError> {
    let path = dir.join("config.json");
    let json = serde_json::to_string_pretty(&run.config).map_err(json_err(&path))?;
    fs::write(&path, json + "\n").map_err(io_err(&path))?;

    let path = dir.join("responses.jsonl");
    let mut sink = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    for r in &run.responses {
        serde_json::to_writer(&mut sink, r).map_err(json_err(&path))?;
        sink.write_all(b"\n").map_err(io_err(&path))?;
    }
    sink.flush().map_err(io_err(&path))?;

    let path = dir.join("ballots.jsonl");
    let records: Vec<BallotRecord> = run
        .responses
        .iter()
        .filter(|r| r.parse_error.is_none())
        .zip(&run.ballots)
        .map(|(r, b)| BallotRecord::new(b, &r.report))
        .collect();
    let sink = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    write_ballots_jsonl(&records, sink).map_err(io_err(&path))?;

    if !run.ballots.is_empty() {
        let path = dir.join("aggregate.csv");
        let result = tally::<f64>(&run.ballots, catalog)?;
        result
            .write_csv(BufWriter::new(File::create(&path).map_err(io_err(&path))?))
            .map_err(io_err(&path))?;
    }

    let path = dir.join("status.json");
    let status = StatusFile {
        label: run.label(),
        config_hash: run.config_hash.clone(),
        status: run.status.clone(),
        n_responses: run.responses.len(),
        n_ballots: run.ballots.len(),
        discarded: run.discarded,
    };
    let json = serde_json::to_string_pretty(&status).map_err(json_err(&path))?;
    fs::write(&path, json + "\n").map_err(io_err(&path))?;
    Ok(())
}

/// Writes an in-memory run to a fresh directory under `out_root`.
pub fn persist_run(run: &ExperimentRun, out_root: &Path) -> Result<PathBuf, HarnessError> {
    let catalog = load_config_catalog(&run.config)?;
    let dir = new_run_dir(out_root, &run.config_hash)?;
    write_run_files(run, &dir, &catalog)?;
    Ok(dir)
}

/// Runs and persists into a fresh directory under `out_root`, recording
/// every reply in the run's `cache.jsonl`. Replay runs copy their source
/// cache in first, so each run directory is self-contained. On a backend
/// failure the partial run is still written and marked failed.
pub fn run_and_persist(config: &ExperimentConfig, out_root: &Path) -> Result<(ExperimentRun, PathBuf), HarnessError> {
    let inputs = prepare(config)?;
    // Fail on a missing source cache or credential before creating the directory.
    let inner = match config.backend {
        BackendKind::Replay => {
            let source = config.cache_path.as_ref().expect("validated");
            if !source.exists() {
                return Err(io_err(source)(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    "cache file not found",
                )));
            }
            None
        }
        _ => Some(build_backend(config, &inputs.catalog, &inputs.survey)?),
    };
    let dir = new_run_dir(out_root, &config.config_hash())?;
    let cache_path = dir.join("cache.jsonl");
    if inner.is_none() {
        let source = config.cache_path.as_ref().expect("validated");
        fs::copy(source, &cache_path).map_err(io_err(source))?;
    }
    let backend = CachedBackend::new(inner, CacheStore::open(&cache_path)?);
    let (run, failure) = execute(config, &inputs, &backend);
    write_run_files(&run, &dir, &inputs.catalog)?;
    match failure {
        Some((agent_index, source)) => Err(HarnessError::BackendFailure {
            agent_index,
            run_dir: Some(dir),
            source,
        }),
        None => Ok((run, dir)),
    }
}

/// Reads a persisted run directory.
pub fn load_run(dir: &Path) -> Result<ExperimentRun, HarnessError> {
    let path = dir.join("config.json");
    let config: ExperimentConfig =
        serde_json::from_reader(BufReader::new(read_file(&path)?)).map_err(json_err(&path))?;

    let path = dir.join("responses.jsonl");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let mut responses = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        responses.push(serde_json::from_str::<ResponseRecord>(line).map_err(json_err(&path))?);
    }

    let path = dir.join("ballots.jsonl");
    let ballots = read_ballots_jsonl(BufReader::new(read_file(&path)?))
        .map_err(io_err(&path))?
        .iter()
        .map(BallotRecord::ballot)
        .collect();

    let path = dir.join("status.json");
    let status = if path.exists() {
        let file: StatusFile = serde_json::from_reader(BufReader::new(read_file(&path)?)).map_err(json_err(&path))?;
        file.status
    } else {
        RunStatus::Complete
    };
    let discarded = responses.iter().filter(|r| r.parse_error.is_some()).count();
    Ok(ExperimentRun {
        config_hash: config.config_hash(),
        config,
        responses,
        ballots,
        discarded,
        status,
    })
}
