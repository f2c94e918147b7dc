//! Human vote data.
//!
//! `votes.csv` has columns `participant_id,method,content`. Approval and
//! ranked contents are `;`-separated ids (ranked in preference order);
//! cumulative contents are `id:points` pairs separated by `;`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, HarnessError};
use crate::catalog::{ProjectCatalog, ProjectId};
use crate::parsing::{Ballot, BallotContent};
use crate::persona::{load_survey, SurveyRecord};
use crate::prompting::VotingMethod;

/// File names inside a baseline directory.
pub const BASELINE_VOTES: &str = "votes.csv";
pub const BASELINE_SURVEY: &str = "survey.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct HumanBaseline {
    /// Ballots per method code, in file order.
    pub ballots: BTreeMap<String, Vec<Ballot>>,
    pub survey: Vec<SurveyRecord>,
}

impl HumanBaseline {
    pub fn ballots_for(&self, method: VotingMethod) -> &[Ballot] {
        self.ballots.get(method.code()).map_or(&[], Vec::as_slice)
    }

    pub fn record(&self, participant_id: &str) -> Option<&SurveyRecord> {
        self.survey.iter().find(|r| r.participant_id == participant_id)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct VoteRow {
    participant_id: String,
    method: String,
    content: String,
}

fn parse_id(token: &str, line: usize, catalog: &ProjectCatalog) -> Result<ProjectId, HarnessError> {
    let digits = token.trim().trim_start_matches('#').trim();
    let id: u32 = digits.parse().map_err(|_| HarnessError::Schema {
        line,
        message: format!("bad project id {token:?}"),
    })?;
    if !catalog.contains(ProjectId(id)) {
        return Err(HarnessError::UnknownProjectId { line, id });
    }
    Ok(ProjectId(id))
}

fn parse_content(
    method: VotingMethod,
    content: &str,
    line: usize,
    catalog: &ProjectCatalog,
) -> Result<BallotContent, HarnessError> {
    let schema = |message: String| HarnessError::Schema { line, message };
    let tokens: Vec<&str> = content.split(';').map(str::trim).filter(|t| !t.is_empty()).collect();
    if tokens.is_empty() {
        return Err(schema("empty ballot".into()));
    }
    Ok(match method {
        VotingMethod::Approval | VotingMethod::KApproval { .. } => {
            let ids = tokens
                .iter()
                .map(|t| parse_id(t, line, catalog))
                .collect::<Result<BTreeSet<_>, _>>()?;
            if ids.len() != tokens.len() {
                return Err(schema("duplicate project id".into()));
            }
            BallotContent::ApprovalSet(ids)
        }
        VotingMethod::Ranked { .. } => {
            let ids = tokens
                .iter()
                .map(|t| parse_id(t, line, catalog))
                .collect::<Result<Vec<_>, _>>()?;
            if ids.iter().collect::<BTreeSet<_>>().len() != ids.len() {
                return Err(schema("duplicate project id in ranking".into()));
            }
            BallotContent::Ranking(ids)
        }
        VotingMethod::Cumulative { .. } => {
            let mut alloc = BTreeMap::new();
            for t in tokens {
                let (id, pts) = t
                    .split_once(':')
                    .ok_or_else(|| schema(format!("expected id:points, got {t:?}")))?;
                let id = parse_id(id, line, catalog)?;
                let pts: f64 = pts
                    .trim()
                    .parse()
                    .ok()
                    .filter(|p: &f64| p.is_finite() && *p >= 0.0)
                    .ok_or_else(|| schema(format!("bad points {pts:?}")))?;
                if alloc.insert(id, pts).is_some() {
                    return Err(schema("duplicate project id".into()));
                }
            }
            BallotContent::Allocation(alloc)
        }
    })
}

/// Loads human votes and the matching survey. Every voting participant
/// must appear in the survey, and every id must be in `catalog`.
pub fn load_human_baseline(
    votes_path: &Path,
    survey_path: &Path,
    catalog: &ProjectCatalog,
) -> Result<HumanBaseline, HarnessError> {
    let survey = load_survey(File::open(survey_path).map_err(io_err(survey_path))?)?;
    let known: BTreeSet<&str> = survey.iter().map(|r| r.participant_id.as_str()).collect();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(File::open(votes_path).map_err(io_err(votes_path))?);
    let mut ballots: BTreeMap<String, Vec<Ballot>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for (i, row) in reader.deserialize::<VoteRow>().enumerate() {
        // Header is line 1.
        let line = i + 2;
        let row = row.map_err(|e| HarnessError::Schema {
            line,
            message: e.to_string(),
        })?;
        let method: VotingMethod = row
            .method
            .parse()
            .map_err(|message| HarnessError::Schema { line, message })?;
        if !known.contains(row.participant_id.as_str()) {
            return Err(HarnessError::Schema {
                line,
                message: format!("participant {} not in survey", row.participant_id),
            });
        }
        if !seen.insert((row.participant_id.clone(), method.code())) {
            return Err(HarnessError::Schema {
                line,
                message: format!("second {} ballot for {}", method.code(), row.participant_id),
            });
        }
        let content = parse_content(method, &row.content, line, catalog)?;
        ballots.entry(method.code().to_string()).or_default().push(Ballot {
            voter_id: row.participant_id,
            method,
            content,
        });
    }
    Ok(HumanBaseline { ballots, survey })
}

/// Writes ballots in the `votes.csv` layout.
pub fn write_human_votes<W: Write>(ballots: &[Ballot], sink: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(sink);
    for b in ballots {
        let content = match &b.content {
            BallotContent::ApprovalSet(s) => s.iter().map(|id| id.to_string()).collect::<Vec<_>>().join(";"),
            BallotContent::Ranking(r) => r.iter().map(|id| id.to_string()).collect::<Vec<_>>().join(";"),
            BallotContent::Allocation(m) => m
                .iter()
                .map(|(id, p)| format!("{id}:{p}"))
                .collect::<Vec<_>>()
                .join(";"),
        };
        writer.serialize(VoteRow {
            participant_id: b.voter_id.clone(),
            method: b.method.code().into(),
            content,
        })?;
    }
    writer.flush()?;
    Ok(())
}
