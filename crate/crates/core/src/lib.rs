//! Participatory-budgeting voting experiments with language-model and
//! simulated agents: ballot catalog and treatments, personas, prompt
//! assembly, agent backends, ballot parsing, aggregation and comparison
//! metrics.
//!
//! Score and statistics code is generic over [`num::Real`]; the aliases
//! below fix it to `f64`.

pub mod agents;
pub mod aggregation;
pub mod catalog;
pub mod harness;
pub mod metrics;
pub mod num;
pub mod parsing;
pub mod persona;
pub mod prompting;

pub use agents::{AgentBackend, AgentParams, BackendKind, RawResponse};
pub use catalog::{ListTreatment, PresentedList, Project, ProjectCatalog, ProjectId};
pub use harness::{ExperimentConfig, ExperimentRun, HumanBaseline};
pub use num::Real;
pub use parsing::{Ballot, BallotContent, ParseReport};
pub use persona::{PersonaText, SurveyRecord};
pub use prompting::{PromptBundle, VotingMethod};

/// Collective outcome with `f64` scores.
pub type Tally = aggregation::AggregateResult<f64>;
/// Collective outcome with `f32` scores.
pub type Tally32 = aggregation::AggregateResult<f32>;
/// Score vector for rank correlation, `f64`.
pub type ScoreRanking = metrics::Ranking<f64>;
/// Test statistic and p-value, `f64`.
pub type Stat = metrics::StatResult<f64>;
/// Per-voter self-alignment shares, `f64`.
pub type SelfAlignment = metrics::Alignment<f64>;
