use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{ExperimentRun, HarnessError, HumanBaseline};
use crate::aggregation::tally;
use crate::catalog::ProjectCatalog;
use crate::metrics::{
    attribute_distribution, jaccard, jaccard_distance, kendall_tau, paired_jaccard, t_test, Attribute, MetricsError,
    PairMode, PairedJaccard, Ranking, VoteSet,
};
use crate::parsing::Ballot;
use crate::prompting::VotingMethod;
use crate::Stat;

/// Ballots of one voter population under one method.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteGroup {
    pub label: String,
    pub method: VotingMethod,
    pub ballots: Vec<Ballot>,
}

impl VoteGroup {
    pub fn from_run(run: &ExperimentRun) -> Self {
        Self {
            label: run.label(),
            method: run.config.method,
            ballots: run.ballots.clone(),
        }
    }

    pub fn from_baseline(baseline: &HumanBaseline, method: VotingMethod) -> Self {
        Self {
            label: format!("human_{}", method.code()),
            method,
            ballots: baseline.ballots_for(method).to_vec(),
        }
    }

    pub(crate) fn vote_sets(&self) -> Vec<(String, VoteSet)> {
        self.ballots
            .iter()
            .map(|b| (b.voter_id.clone(), VoteSet(b.content.support())))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDelta {
    pub attribute: Attribute,
    pub value: String,
    pub share_a: f64,
    pub share_b: f64,
    /// `share_b - share_a`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub label_a: String,
    pub label_b: String,
    pub method: VotingMethod,
    /// Between the two collective rankings (ties broken by id).
    pub tau: f64,
    pub pair_mode: PairMode,
    pub jaccard: PairedJaccard<f64>,
    pub attribute_deltas: Vec<AttributeDelta>,
    /// Welch test of matched-voter Jaccard values against mismatched pairs;
    /// present only for matched groups with non-degenerate values.
    pub t_test: Option<Stat>,
}

fn ids_align(a: &[(String, VoteSet)], b: &[(String, VoteSet)]) -> bool {
    let ka: BTreeSet<&str> = a.iter().map(|(id, _)| id.as_str()).collect();
    let kb: BTreeSet<&str> = b.iter().map(|(id, _)| id.as_str()).collect();
    ka.len() == a.len() && kb.len() == b.len() && ka == kb
}

pub fn compare_runs(a: &VoteGroup, b: &VoteGroup, catalog: &ProjectCatalog) -> Result<ComparisonReport, HarnessError> {
    if a.method != b.method {
        return Err(HarnessError::MethodMismatch(a.method, b.method));
    }
    let ta = tally::<f64>(&a.ballots, catalog)?;
    let tb = tally::<f64>(&b.ballots, catalog)?;
    let tau = kendall_tau(&Ranking::from(&ta), &Ranking::from(&tb))?;

    let (sa, sb) = (a.vote_sets(), b.vote_sets());
    let pair_mode = if ids_align(&sa, &sb) {
        PairMode::MatchedById
    } else {
        PairMode::AllPairs
    };
    let jac = paired_jaccard::<f64>(&sa, &sb, pair_mode)?;

    let t = if pair_mode == PairMode::MatchedById {
        let mismatched = sa
            .iter()
            .flat_map(|(ia, va)| {
                sb.iter()
                    .filter(move |(ib, _)| ib != ia)
                    .map(move |(_, vb)| jaccard::<f64>(va, vb))
            })
            .collect::<Result<Vec<_>, _>>()?;
        t_test(&jac.values, &mismatched).ok()
    } else {
        None
    };

    let mut attribute_deltas = Vec::new();
    for attribute in Attribute::ALL {
        let da = attribute_distribution::<f64>(&a.ballots, catalog, attribute)?;
        let db = attribute_distribution::<f64>(&b.ballots, catalog, attribute)?;
        for ((value, share_a), (_, share_b)) in da.into_iter().zip(db) {
            attribute_deltas.push(AttributeDelta {
                attribute,
                value,
                share_a,
                share_b,
                delta: share_b - share_a,
            });
        }
    }
    Ok(ComparisonReport {
        label_a: a.label.clone(),
        label_b: b.label.clone(),
        method: a.method,
        tau,
        pair_mode,
        jaccard: jac,
        attribute_deltas,
        t_test: t,
    })
}

/// Jaccard distances of every unordered voter pair, `(0,1), (0,2), ...`.
pub(crate) fn pairwise_distances(ballots: &[Ballot]) -> Result<Vec<f64>, MetricsError> {
    let sets: Vec<VoteSet> = ballots.iter().map(|b| VoteSet(b.content.support())).collect();
    let mut out = Vec::with_capacity(sets.len() * sets.len().saturating_sub(1) / 2);
    for i in 0..sets.len() {
        for j in (i + 1)..sets.len() {
            out.push(jaccard_distance(&sets[i], &sets[j])?);
        }
    }
    Ok(out)
}

/// Mean Jaccard distance over all unordered voter pairs.
pub fn within_group_dissimilarity(ballots: &[Ballot]) -> Result<f64, MetricsError> {
    let d = pairwise_distances(ballots)?;
    if d.is_empty() {
        return Err(MetricsError::TooFewObservations {
            needed: 2,
            got: ballots.len(),
        });
    }
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}
