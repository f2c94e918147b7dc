use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::aggregation::ballot_mass;
use crate::catalog::{Category, District, Project, ProjectCatalog, COSTS};
use crate::num::Real;
use crate::parsing::{Ballot, BallotContent};
use crate::persona::SurveyRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    District,
    Category,
    Cost,
}

impl Attribute {
    pub const ALL: [Attribute; 3] = [Attribute::District, Attribute::Category, Attribute::Cost];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::District => "district",
            Attribute::Category => "category",
            Attribute::Cost => "cost",
        }
    }

    /// All values of the attribute, in catalog order.
    pub fn values(self) -> Vec<String> {
        match self {
            Attribute::District => District::ALL.iter().map(|d| d.to_string()).collect(),
            Attribute::Category => Category::ALL.iter().map(|c| c.to_string()).collect(),
            Attribute::Cost => COSTS.iter().map(|c| c.to_string()).collect(),
        }
    }

    pub fn value_of(self, project: &Project) -> String {
        match self {
            Attribute::District => project.district.to_string(),
            Attribute::Category => project.category.to_string(),
            Attribute::Cost => project.cost.to_string(),
        }
    }
}

/// Share of one ballot's vote mass on the voter's own district and on their
/// top-scored category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment<S> {
    pub district_share: S,
    pub category_share: S,
}

pub fn self_alignment<S: Real>(
    ballot: &Ballot,
    record: &SurveyRecord,
    catalog: &ProjectCatalog,
) -> Result<Alignment<S>, MetricsError> {
    let mass = ballot_mass::<S>(ballot)?;
    let top = record.top_category();
    let mut total = S::zero();
    let mut district = S::zero();
    let mut category = S::zero();
    for (id, m) in mass {
        let Some(p) = catalog.get(id) else { continue };
        total += m;
        if p.district == record.district {
            district += m;
        }
        if p.category == top {
            category += m;
        }
    }
    if total <= S::zero() {
        return Err(MetricsError::NoBallots);
    }
    Ok(Alignment {
        district_share: district / total,
        category_share: category / total,
    })
}

/// Vote-mass shares per attribute value over all ballots. Every value of the
/// attribute appears in the output, in catalog order.
pub fn attribute_distribution<S: Real>(
    ballots: &[Ballot],
    catalog: &ProjectCatalog,
    attribute: Attribute,
) -> Result<Vec<(String, S)>, MetricsError> {
    if ballots.is_empty() {
        return Err(MetricsError::NoBallots);
    }
    let mut totals: BTreeMap<String, S> = BTreeMap::new();
    let mut all = S::zero();
    for b in ballots {
        for (id, m) in ballot_mass::<S>(b)? {
            let Some(p) = catalog.get(id) else { continue };
            *totals.entry(attribute.value_of(p)).or_insert_with(S::zero) += m;
            all += m;
        }
    }
    if all <= S::zero() {
        return Err(MetricsError::NoBallots);
    }
    Ok(attribute
        .values()
        .into_iter()
        .map(|v| {
            let share = totals.get(&v).copied().unwrap_or_else(S::zero) / all;
            (v, share)
        })
        .collect())
}

/// Percentage of approval ballots by number of selected projects.
pub fn selection_count_histogram<S: Real>(ballots: &[Ballot]) -> Result<BTreeMap<usize, S>, MetricsError> {
    if ballots.is_empty() {
        return Err(MetricsError::NoBallots);
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for b in ballots {
        let BallotContent::ApprovalSet(ids) = &b.content else {
            return Err(MetricsError::NotApproval);
        };
        *counts.entry(ids.len()).or_default() += 1;
    }
    let n = S::count(ballots.len());
    Ok(counts
        .into_iter()
        .map(|(size, c)| (size, S::lit(100.0) * S::count(c) / n))
        .collect())
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::catalog::ProjectId;
    use crate::prompting::VotingMethod;
    use proptest::prelude::*;

    fn ballot() -> impl Strategy<Value = Ballot> {
        prop_oneof![proptest::collection::btree_set(1u32..=24, 1..24).prop_map(|s| Ballot {
            voter_id: "v".into(),
            method: VotingMethod::Approval,
            content: BallotContent::ApprovalSet(s.into_iter().map(ProjectId).collect()),
        }),]
    }

    fn cumu() -> impl Strategy<Value = Ballot> {
        proptest::collection::btree_map(1u32..=24, 1u32..=9, 1..8).prop_map(|m| Ballot {
            voter_id: "v".into(),
            method: VotingMethod::CUMULATIVE,
            content: BallotContent::Allocation(m.into_iter().map(|(k, v)| (ProjectId(k), v as f64)).collect()),
        })
    }

    proptest! {
        #[test]
        fn shares_sum_to_one(ballots in proptest::collection::vec(ballot(), 1..30), cballots in proptest::collection::vec(cumu(), 1..30)) {
            let cat = ProjectCatalog::builtin();
            for attr in Attribute::ALL {
                for set in [&ballots, &cballots] {
                    let d: Vec<(String, f64)> = attribute_distribution(set, &cat, attr).unwrap();
                    let total: f64 = d.iter().map(|(_, s)| s).sum();
                    prop_assert!((total - 1.0).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn alignment_in_unit_interval(b in cumu(), d in 0usize..4, c in 0usize..3) {
            let cat = ProjectCatalog::builtin();
            let others: Vec<Category> = Category::ALL.into_iter().filter(|x| *x != Category::ALL[c]).collect();
            let rec = SurveyRecord {
                participant_id: "p".into(),
                category_scores: [(Category::ALL[c], 50), (others[0], 30), (others[1], 20)],
                district: District::ALL[d],
                connectedness: String::new(),
                district_importance: String::new(),
                category_importance: String::new(),
                cost_importance: String::new(),
                likelihood_importance: String::new(),
            };
            let a: Alignment<f64> = self_alignment(&b, &rec, &cat).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&a.district_share));
            prop_assert!((0.0..=1.0 + 1e-12).contains(&a.category_share));
        }
    }
}
