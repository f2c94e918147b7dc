use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::catalog::ProjectId;
use crate::num::Real;

/// A voter's supported projects.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VoteSet(pub BTreeSet<ProjectId>);

impl FromIterator<ProjectId> for VoteSet {
    fn from_iter<I: IntoIterator<Item = ProjectId>>(iter: I) -> Self {
        VoteSet(iter.into_iter().collect())
    }
}

/// `|A ∩ B| / |A ∪ B|`.
pub fn jaccard<S: Real>(a: &VoteSet, b: &VoteSet) -> Result<S, MetricsError> {
    let union = a.0.union(&b.0).count();
    if union == 0 {
        return Err(MetricsError::BothEmpty);
    }
    let inter = a.0.intersection(&b.0).count();
    Ok(S::count(inter) / S::count(union))
}

pub fn jaccard_distance<S: Real>(a: &VoteSet, b: &VoteSet) -> Result<S, MetricsError> {
    Ok(S::one() - jaccard::<S>(a, b)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairMode {
    /// One value per voter id present in both groups.
    MatchedById,
    /// Every voter of A against every voter of B, A-major order.
    AllPairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedJaccard<S> {
    pub values: Vec<S>,
    pub mean: S,
}

pub fn paired_jaccard<S: Real>(
    group_a: &[(String, VoteSet)],
    group_b: &[(String, VoteSet)],
    mode: PairMode,
) -> Result<PairedJaccard<S>, MetricsError> {
    let values: Vec<S> = match mode {
        PairMode::MatchedById => {
            let a: BTreeMap<&str, &VoteSet> = group_a.iter().map(|(id, s)| (id.as_str(), s)).collect();
            let b: BTreeMap<&str, &VoteSet> = group_b.iter().map(|(id, s)| (id.as_str(), s)).collect();
            if a.len() != group_a.len() || b.len() != group_b.len() || a.keys().ne(b.keys()) {
                return Err(MetricsError::IdMismatch);
            }
            a.iter().map(|(id, sa)| jaccard(sa, b[id])).collect::<Result<_, _>>()?
        }
        PairMode::AllPairs => group_a
            .iter()
            .flat_map(|(_, sa)| group_b.iter().map(move |(_, sb)| jaccard(sa, sb)))
            .collect::<Result<_, _>>()?,
    };
    if values.is_empty() {
        return Err(MetricsError::TooFewObservations { needed: 1, got: 0 });
    }
    let mean = values.iter().fold(S::zero(), |acc, v| acc + *v) / S::count(values.len());
    Ok(PairedJaccard { values, mean })
}
