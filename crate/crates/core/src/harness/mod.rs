//! Experiment runner: configuration, concurrent agent calls, run
//! persistence, human baselines, comparisons and report tables.

mod baseline;
mod compare;
mod config;
mod matrix;
mod report;
mod run;
mod synth;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::agents::AgentError;
use crate::aggregation::AggregationError;
use crate::catalog::CatalogError;
use crate::metrics::MetricsError;
use crate::persona::PersonaError;
use crate::prompting::{PromptError, VotingMethod};

pub use baseline::{load_human_baseline, write_human_votes, HumanBaseline, BASELINE_SURVEY, BASELINE_VOTES};
pub use compare::{compare_runs, within_group_dissimilarity, AttributeDelta, ComparisonReport, VoteGroup};
pub use config::{ExperimentConfig, DEFAULT_AGENTS};
pub use matrix::MatrixSpec;
pub use report::{report, REPORT_FILES};
pub use run::{
    load_run, load_run_catalog, persist_run, run_and_persist, run_experiment, run_experiment_with, ExperimentRun,
    ResponseRecord, RunStatus,
};
pub use synth::synthetic_survey;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Persona(#[from] PersonaError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("persona runs need a survey file")]
    SurveyRequired,
    #[error("survey has {got} records, run needs {needed}")]
    SurveyTooSmall { needed: usize, got: usize },
    #[error("backend failed for agent {agent_index}: {source}")]
    BackendFailure {
        agent_index: usize,
        /// Where the partial run was persisted, if anywhere.
        run_dir: Option<PathBuf>,
        source: AgentError,
    },
    #[error("cannot compare {0} with {1}")]
    MethodMismatch(VotingMethod, VotingMethod),
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}: unknown project id {id}")]
    UnknownProjectId { line: usize, id: u32 },
    #[error("no runs given")]
    NoRuns,
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> HarnessError + '_ {
    move |source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    }
}
