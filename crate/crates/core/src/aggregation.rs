//! Collective score vectors: approval counts, Borda points, normalized
//! cumulative allocations.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{ProjectCatalog, ProjectId};
use crate::num::Real;
use crate::parsing::{Ballot, BallotContent};
use crate::prompting::VotingMethod;

#[derive(Debug, Error, PartialEq)]
pub enum AggregationError {
    #[error("ballot set is empty")]
    EmptyBallotSet,
    #[error("ballots mix methods {0} and {1}")]
    MixedMethods(VotingMethod, VotingMethod),
    #[error("cumulative allocation has no positive points")]
    ZeroAllocation,
    #[error("negative points for project {0}")]
    NegativePoints(ProjectId),
    #[error("ballot content does not match method {0}")]
    ContentMismatch(VotingMethod),
}

/// Target sum of a normalized cumulative ballot.
pub const CUMULATIVE_TARGET: f64 = 10.0;

/// Per-project totals and the derived collective ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult<S> {
    pub scores: BTreeMap<ProjectId, S>,
    /// All ids, descending score, ties by ascending id.
    pub ranking: Vec<ProjectId>,
    pub method: VotingMethod,
    pub n_ballots: usize,
}

impl<S: Real> AggregateResult<S> {
    pub fn total_mass(&self) -> S {
        self.scores.values().fold(S::zero(), |acc, s| acc + *s)
    }

    /// Writes `rank,id,score`.
    pub fn write_csv<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        writeln!(sink, "rank,id,score")?;
        for (rank, id) in self.ranking.iter().enumerate() {
            writeln!(sink, "{},{},{}", rank + 1, id, self.scores[id])?;
        }
        Ok(())
    }
}

/// Borda points for a top-`n` ranking: position 1 gets `n`, position `n` gets 1.
pub fn borda_points(ranking: &[ProjectId]) -> BTreeMap<ProjectId, u32> {
    let n = ranking.len() as u32;
    ranking.iter().enumerate().map(|(i, id)| (*id, n - i as u32)).collect()
}

/// Scales an allocation so its values sum to 10, preserving proportions.
pub fn normalize_cumulative<S: Real>(
    allocation: &BTreeMap<ProjectId, f64>,
) -> Result<BTreeMap<ProjectId, S>, AggregationError> {
    if let Some((id, _)) = allocation.iter().find(|(_, p)| **p < 0.0) {
        return Err(AggregationError::NegativePoints(*id));
    }
    let total: f64 = allocation.values().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(AggregationError::ZeroAllocation);
    }
    let target = S::lit(CUMULATIVE_TARGET);
    let total = S::lit(total);
    Ok(allocation
        .iter()
        .map(|(id, p)| (*id, S::lit(*p) * target / total))
        .collect())
}

/// The vote mass one ballot places on each project: 1 per approval, Borda
/// points for rankings, normalized points for allocations.
pub fn ballot_mass<S: Real>(ballot: &Ballot) -> Result<BTreeMap<ProjectId, S>, AggregationError> {
    match (&ballot.method, &ballot.content) {
        (VotingMethod::Approval | VotingMethod::KApproval { .. }, BallotContent::ApprovalSet(ids)) => {
            Ok(ids.iter().map(|id| (*id, S::one())).collect())
        }
        (VotingMethod::Ranked { .. }, BallotContent::Ranking(r)) => Ok(borda_points(r)
            .into_iter()
            .map(|(id, p)| (id, S::count(p as usize)))
            .collect()),
        (VotingMethod::Cumulative { .. }, BallotContent::Allocation(a)) => normalize_cumulative(a),
        (m, _) => Err(AggregationError::ContentMismatch(*m)),
    }
}

/// Orders ids by descending score with ascending-id tie-break.
///
/// Scores within a relative `1e-9` of their predecessor count as tied, so that
/// rounding differences in normalized cumulative sums cannot reorder projects.
pub fn rank_scores<S: Real>(scores: &BTreeMap<ProjectId, S>) -> Vec<ProjectId> {
    let mut entries: Vec<(ProjectId, S)> = scores.iter().map(|(id, s)| (*id, *s)).collect();
    entries.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    let scale = entries
        .iter()
        .fold(S::one(), |m, (_, s)| if s.abs() > m { s.abs() } else { m });
    let tol = S::lit(1e-9) * scale;
    let mut ranking = Vec::with_capacity(entries.len());
    let mut group: Vec<ProjectId> = Vec::new();
    let mut prev: Option<S> = None;
    for (id, s) in entries {
        if let Some(p) = prev {
            if p - s > tol {
                group.sort();
                ranking.append(&mut group);
            }
        }
        group.push(id);
        prev = Some(s);
    }
    group.sort();
    ranking.append(&mut group);
    ranking
}

/// Sums ballot masses in ballot order over every catalog project.
pub fn tally<S: Real>(ballots: &[Ballot], catalog: &ProjectCatalog) -> Result<AggregateResult<S>, AggregationError> {
    let first = ballots.first().ok_or(AggregationError::EmptyBallotSet)?;
    let method = first.method;
    if let Some(b) = ballots.iter().find(|b| b.method != method) {
        return Err(AggregationError::MixedMethods(method, b.method));
    }
    let mut scores: BTreeMap<ProjectId, S> = catalog.ids().map(|id| (id, S::zero())).collect();
    for ballot in ballots {
        for (id, mass) in ballot_mass::<S>(ballot)? {
            *scores.entry(id).or_insert_with(S::zero) += mass;
        }
    }
    let ranking = rank_scores(&scores);
    Ok(AggregateResult {
        scores,
        ranking,
        method,
        n_ballots: ballots.len(),
    })
}
