//! Ballot extraction from free-form agent replies.
//!
//! Votes are recognised by `#<digits>` tokens. Every token is read in the
//! displayed-id space of the list the agent saw and mapped back to canonical
//! ids immediately. Each deviation from a well-formed answer is recorded in a
//! [`ParseReport`].

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{PresentedList, ProjectId};
use crate::prompting::VotingMethod;

static ID_TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#\s*(\d+)").unwrap());
static NUMBERED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:^|[\s:])(\d{1,2})[.)]\s*#\s*(\d+)").unwrap());
static COLON_POINTS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*:\s*(\d+(?:\.\d+)?)").unwrap());
static COLON: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*:").unwrap());
static SUFFIX_POINTS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)(\d+(?:\.\d+)?)\s*points?\b").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Repair {
    DeduplicatedId,
    TruncatedToK,
    PaddedRejected,
    OutOfRangeDropped,
    OverAllocation,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub repairs: Vec<Repair>,
    /// Number of `#id` tokens seen before any repair.
    pub raw_id_count: usize,
}

impl ParseReport {
    fn note(&mut self, repair: Repair) {
        if !self.repairs.contains(&repair) {
            self.repairs.push(repair);
        }
    }

    pub fn is_clean(&self) -> bool {
        self.repairs.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("no valid project ids in response")]
    NoVotesFound,
    #[error("expected {needed} distinct projects, found {found}")]
    TooFewVotes {
        found: usize,
        needed: usize,
        report: ParseReport,
    },
    #[error("non-numeric points for #{id}: {fragment:?}")]
    NonNumericPoints { id: u32, fragment: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallotContent {
    ApprovalSet(BTreeSet<ProjectId>),
    /// Raw points, kept as parsed even when they exceed the budget.
    Allocation(BTreeMap<ProjectId, f64>),
    Ranking(Vec<ProjectId>),
}

impl BallotContent {
    /// Ids that received any support.
    pub fn support(&self) -> BTreeSet<ProjectId> {
        match self {
            BallotContent::ApprovalSet(s) => s.clone(),
            BallotContent::Allocation(m) => m.iter().filter(|(_, p)| **p > 0.0).map(|(id, _)| *id).collect(),
            BallotContent::Ranking(r) => r.iter().copied().collect(),
        }
    }
}

/// One voter's parsed vote in canonical id space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ballot {
    pub voter_id: String,
    pub method: VotingMethod,
    pub content: BallotContent,
}

/// Serialized form of a ballot: `{voter_id, method, content, repairs}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallotRecord {
    pub voter_id: String,
    pub method: VotingMethod,
    pub content: BallotContent,
    pub repairs: Vec<Repair>,
}

impl BallotRecord {
    pub fn new(ballot: &Ballot, report: &ParseReport) -> Self {
        Self {
            voter_id: ballot.voter_id.clone(),
            method: ballot.method,
            content: ballot.content.clone(),
            repairs: report.repairs.clone(),
        }
    }

    pub fn ballot(&self) -> Ballot {
        Ballot {
            voter_id: self.voter_id.clone(),
            method: self.method,
            content: self.content.clone(),
        }
    }
}

pub fn write_ballots_jsonl<W: Write>(records: &[BallotRecord], mut sink: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut sink, r)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_ballots_jsonl<R: BufRead>(source: R) -> std::io::Result<Vec<BallotRecord>> {
    let mut out = Vec::new();
    for line in source.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(std::io::Error::other)?);
    }
    Ok(out)
}

struct Token {
    displayed: Option<u32>,
    start: usize,
    end: usize,
}

fn tokens(text: &str) -> Vec<Token> {
    ID_TOKEN
        .captures_iter(text)
        .map(|c| {
            let whole = c.get(0).unwrap();
            Token {
                displayed: c[1].parse().ok(),
                start: whole.start(),
                end: whole.end(),
            }
        })
        .collect()
}

fn canonical(token: Option<u32>, list: &PresentedList) -> Option<ProjectId> {
    token.and_then(|d| list.canonical(d))
}

/// Canonical ids in appearance order, out-of-range dropped and duplicates collapsed.
fn distinct_ids(text: &str, list: &PresentedList, report: &mut ParseReport) -> Vec<ProjectId> {
    let toks = tokens(text);
    report.raw_id_count = toks.len();
    let mut seen = BTreeSet::new();
    let mut ids = Vec::new();
    for t in toks {
        match canonical(t.displayed, list) {
            None => report.note(Repair::OutOfRangeDropped),
            Some(id) if !seen.insert(id) => report.note(Repair::DeduplicatedId),
            Some(id) => ids.push(id),
        }
    }
    ids
}

/// Approval and k-approval answers. With `k`, longer answers are truncated to
/// the first `k` ids and shorter ones rejected.
pub fn parse_approvals(
    text: &str,
    list: &PresentedList,
    k: Option<usize>,
) -> Result<(BallotContent, ParseReport), ParseError> {
    let mut report = ParseReport::default();
    let mut ids = distinct_ids(text, list, &mut report);
    if ids.is_empty() {
        return Err(ParseError::NoVotesFound);
    }
    if let Some(k) = k {
        if ids.len() < k {
            report.note(Repair::PaddedRejected);
            return Err(ParseError::TooFewVotes {
                found: ids.len(),
                needed: k,
                report,
            });
        }
        if ids.len() > k {
            ids.truncate(k);
            report.note(Repair::TruncatedToK);
        }
    }
    Ok((BallotContent::ApprovalSet(ids.into_iter().collect()), report))
}

/// Cumulative answers: `#id: n`, `#id - n points`, `#id - Name ... - n points`.
/// A repeated id overwrites its earlier allocation.
pub fn parse_cumulative(
    text: &str,
    list: &PresentedList,
    budget: u32,
) -> Result<(BallotContent, ParseReport), ParseError> {
    let mut report = ParseReport::default();
    let toks = tokens(text);
    report.raw_id_count = toks.len();
    let mut allocation = BTreeMap::new();
    for (i, tok) in toks.iter().enumerate() {
        let seg_end = toks.get(i + 1).map_or(text.len(), |n| n.start);
        let segment = &text[tok.end..seg_end];
        let points = if COLON.is_match(segment) {
            match COLON_POINTS.captures(segment) {
                Some(c) => c[1].parse::<f64>().ok(),
                None => {
                    return Err(ParseError::NonNumericPoints {
                        id: tok.displayed.unwrap_or(0),
                        fragment: segment.trim().chars().take(40).collect(),
                    })
                }
            }
        } else {
            SUFFIX_POINTS.captures(segment).and_then(|c| c[1].parse::<f64>().ok())
        };
        // A bare mention without points is prose, not an allocation.
        let Some(points) = points else { continue };
        match canonical(tok.displayed, list) {
            None => report.note(Repair::OutOfRangeDropped),
            Some(id) => {
                if allocation.insert(id, points).is_some() {
                    report.note(Repair::DeduplicatedId);
                }
            }
        }
    }
    if allocation.is_empty() {
        return Err(ParseError::NoVotesFound);
    }
    let total: f64 = allocation.values().sum();
    if (total - budget as f64).abs() > 1e-9 {
        report.note(Repair::OverAllocation);
    }
    Ok((BallotContent::Allocation(allocation), report))
}

/// Ranked answers. An explicit numbered list `1. #a ... top. #e` wins over
/// token order; otherwise the first `top` distinct ids are the ranking.
pub fn parse_ranked(text: &str, list: &PresentedList, top: usize) -> Result<(BallotContent, ParseReport), ParseError> {
    let mut report = ParseReport::default();
    let mut by_position: BTreeMap<usize, Option<ProjectId>> = BTreeMap::new();
    for c in NUMBERED.captures_iter(text) {
        if let Ok(pos) = c[1].parse::<usize>() {
            if (1..=top).contains(&pos) {
                by_position.insert(pos, canonical(c[2].parse().ok(), list));
            }
        }
    }
    if by_position.len() == top {
        let ranking: Vec<ProjectId> = by_position.values().flatten().copied().collect();
        let distinct: BTreeSet<_> = ranking.iter().collect();
        if ranking.len() == top && distinct.len() == top {
            report.raw_id_count = tokens(text).len();
            return Ok((BallotContent::Ranking(ranking), report));
        }
    }

    let mut ids = distinct_ids(text, list, &mut report);
    if ids.is_empty() {
        return Err(ParseError::NoVotesFound);
    }
    if ids.len() < top {
        report.note(Repair::PaddedRejected);
        return Err(ParseError::TooFewVotes {
            found: ids.len(),
            needed: top,
            report,
        });
    }
    if ids.len() > top {
        ids.truncate(top);
        report.note(Repair::TruncatedToK);
    }
    Ok((BallotContent::Ranking(ids), report))
}

/// Dispatches on the method and attaches the voter id.
pub fn parse_ballot(
    voter_id: &str,
    method: VotingMethod,
    text: &str,
    list: &PresentedList,
) -> Result<(Ballot, ParseReport), ParseError> {
    let (content, report) = match method {
        VotingMethod::Approval => parse_approvals(text, list, None)?,
        VotingMethod::KApproval { k } => parse_approvals(text, list, Some(k))?,
        VotingMethod::Cumulative { points } => parse_cumulative(text, list, points)?,
        VotingMethod::Ranked { top } => parse_ranked(text, list, top)?,
    };
    Ok((
        Ballot {
            voter_id: voter_id.to_string(),
            method,
            content,
        },
        report,
    ))
}

/// Renders a ballot in the well-formed text format of its method, using the
/// displayed ids of `list`.
pub fn format_ballot(content: &BallotContent, list: &PresentedList) -> String {
    let shown = |id: &ProjectId| list.displayed(*id).unwrap_or(id.0);
    match content {
        BallotContent::ApprovalSet(ids) => ids
            .iter()
            .map(|id| format!("#{}", shown(id)))
            .collect::<Vec<_>>()
            .join(", "),
        BallotContent::Allocation(m) => m
            .iter()
            .map(|(id, p)| format!("#{}: {}", shown(id), p))
            .collect::<Vec<_>>()
            .join("\n"),
        BallotContent::Ranking(r) => r
            .iter()
            .enumerate()
            .map(|(i, id)| format!("{}. #{}", i + 1, shown(id)))
            .collect::<Vec<_>>()
            .join("\n"),
    }
}
