//! Deterministic utility voter.
//!
//! Each project gets a utility from the voter's category weights, a bonus for
//! the home district and a reward for cheaper projects. Picks are drawn one
//! at a time without replacement from a softmax over the remaining
//! utilities; at temperature 0 this degenerates to argmax with ties broken
//! by canonical id.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AgentBackend, AgentError, AgentParams, BackendKind, RawResponse};
use crate::catalog::{apply_list_treatment, Category, District, PresentedList, Project, ProjectCatalog, ProjectId};
use crate::persona::SurveyRecord;
use crate::prompting::{PromptBundle, VotingMethod};

/// Projects that share a cumulative ballot.
pub const CUMULATIVE_PICKS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockVoterProfile {
    pub category_weights: BTreeMap<Category, f64>,
    pub home_district: District,
    pub district_bonus: f64,
    /// Utility per CHF 1,000 saved relative to the CHF 10,000 tier.
    pub cost_aversion: f64,
    pub noise_seed: u64,
}

/// How survey answers translate into a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MockScales {
    /// Weight at a category score of 100.
    pub category: f64,
    /// District bonus at full importance.
    pub district: f64,
    /// Cost aversion at full importance.
    pub cost: f64,
    /// Scale district and cost terms by the stated importance labels.
    pub importance_weighted: bool,
}

impl Default for MockScales {
    fn default() -> Self {
        Self {
            category: 3.0,
            district: 1.5,
            cost: 0.2,
            importance_weighted: true,
        }
    }
}

/// Maps a survey importance label onto [0, 1]; unknown labels read as 0.5.
pub fn importance_level(label: &str) -> f64 {
    match label.trim().to_lowercase().as_str() {
        "not important at all" | "not important" => 0.0,
        "slightly important" => 0.25,
        "moderately important" => 0.5,
        "very important" => 0.75,
        "extremely important" => 1.0,
        _ => 0.5,
    }
}

impl MockVoterProfile {
    /// Profile of a voter without a persona: leans towards transportation
    /// and mildly towards cheaper projects, no home-district bonus.
    pub fn baseline(noise_seed: u64) -> Self {
        Self {
            category_weights: BTreeMap::from([
                (Category::Nature, 1.0),
                (Category::Culture, 0.7),
                (Category::Transportation, 1.6),
            ]),
            home_district: District::Nord,
            district_bonus: 0.0,
            cost_aversion: 0.1,
            noise_seed,
        }
    }

    pub fn from_record(record: &SurveyRecord, scales: &MockScales, noise_seed: u64) -> Self {
        let (district_level, cost_level) = if scales.importance_weighted {
            (
                importance_level(&record.district_importance),
                importance_level(&record.cost_importance),
            )
        } else {
            (1.0, 1.0)
        };
        Self {
            category_weights: Category::ALL
                .iter()
                .map(|c| (*c, scales.category * record.score_of(*c) as f64 / 100.0))
                .collect(),
            home_district: record.district,
            district_bonus: scales.district * district_level,
            cost_aversion: scales.cost * cost_level,
            noise_seed,
        }
    }
}

pub fn utility(profile: &MockVoterProfile, project: &Project) -> f64 {
    let weight = profile.category_weights.get(&project.category).copied().unwrap_or(0.0);
    let home = if project.district == profile.home_district {
        profile.district_bonus
    } else {
        0.0
    };
    weight + home + profile.cost_aversion * (10000.0 - project.cost as f64) / 1000.0
}

fn rng_for(profile: &MockVoterProfile, seed: u64) -> ChaCha8Rng {
    let mixed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17)
        ^ profile.noise_seed.wrapping_mul(0xD1B5_4A32_D192_ED03);
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Softmax peeling: the full pick order over all candidates.
fn peel(utilities: &[(ProjectId, f64)], temperature: f64, rng: &mut ChaCha8Rng, picks: usize) -> Vec<ProjectId> {
    let mut remaining: Vec<(ProjectId, f64)> = utilities.to_vec();
    remaining.sort_by_key(|(id, _)| *id);
    let mut order = Vec::with_capacity(picks);
    while order.len() < picks && !remaining.is_empty() {
        let idx = if temperature <= 0.0 {
            // First maximum in id order.
            let mut best = 0;
            for (i, (_, u)) in remaining.iter().enumerate() {
                if *u > remaining[best].1 {
                    best = i;
                }
            }
            best
        } else {
            let max = remaining.iter().map(|(_, u)| *u).fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = remaining.iter().map(|(_, u)| ((u - max) / temperature).exp()).collect();
            let total: f64 = weights.iter().sum();
            let mut draw = rng.random::<f64>() * total;
            let mut chosen = weights.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if draw < *w {
                    chosen = i;
                    break;
                }
                draw -= w;
            }
            chosen
        };
        order.push(remaining.remove(idx).0);
    }
    order
}

/// Splits `budget` points over `weights` by largest remainder, so the parts
/// always sum to `budget`. Ties in remainder go to the earlier entry.
pub fn allocate_points(weights: &[f64], budget: u32) -> Vec<u32> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() {
        return Vec::new();
    }
    if total <= 0.0 {
        let mut out = vec![0; weights.len()];
        out[0] = budget;
        return out;
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / total * budget as f64).collect();
    let mut out: Vec<u32> = exact.iter().map(|e| e.floor() as u32).collect();
    let assigned: u32 = out.iter().sum();
    let mut by_remainder: Vec<usize> = (0..weights.len()).collect();
    by_remainder.sort_by(|a, b| {
        let ra = exact[*a] - exact[*a].floor();
        let rb = exact[*b] - exact[*b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(b))
    });
    for i in by_remainder.into_iter().take(budget.saturating_sub(assigned) as usize) {
        out[i] += 1;
    }
    out
}

/// Produces a reply in the method's expected format, in the displayed ids of `list`.
pub fn mock_select(
    profile: &MockVoterProfile,
    list: &PresentedList,
    method: VotingMethod,
    temperature: f64,
    seed: u64,
) -> String {
    let utilities: Vec<(ProjectId, f64)> = list
        .rows()
        .iter()
        .map(|r| (r.project.id, utility(profile, &r.project)))
        .collect();
    let by_id: BTreeMap<ProjectId, f64> = utilities.iter().copied().collect();
    let shown = |id: ProjectId| list.displayed(id).unwrap_or(id.0);
    let mut rng = rng_for(profile, seed);
    let n = utilities.len();
    match method {
        VotingMethod::Approval => {
            let mean = utilities.iter().map(|(_, u)| u).sum::<f64>() / n.max(1) as f64;
            let count = utilities.iter().filter(|(_, u)| *u >= mean).count().max(1);
            peel(&utilities, temperature, &mut rng, count)
                .into_iter()
                .map(|id| format!("#{}", shown(id)))
                .collect::<Vec<_>>()
                .join(", ")
        }
        VotingMethod::KApproval { k } => peel(&utilities, temperature, &mut rng, k)
            .into_iter()
            .map(|id| format!("#{}", shown(id)))
            .collect::<Vec<_>>()
            .join(", "),
        VotingMethod::Ranked { top } => peel(&utilities, temperature, &mut rng, top)
            .into_iter()
            .map(|id| format!("#{}", shown(id)))
            .collect::<Vec<_>>()
            .join(","),
        VotingMethod::Cumulative { points } => {
            let picks = peel(&utilities, temperature, &mut rng, CUMULATIVE_PICKS);
            let floor = utilities.iter().map(|(_, u)| *u).fold(f64::INFINITY, f64::min);
            let weights: Vec<f64> = picks.iter().map(|id| by_id[id] - floor + 1.0).collect();
            picks
                .iter()
                .zip(allocate_points(&weights, points))
                .filter(|(_, p)| *p > 0)
                .map(|(id, p)| format!("#{}: {}", shown(*id), p))
                .collect::<Vec<_>>()
                .join("\n")
        }
    }
}

/// Mock backend: agent `i` votes with profile `i`, or the baseline profile
/// when no profile list is configured.
pub struct MockBackend {
    catalog: ProjectCatalog,
    profiles: Vec<MockVoterProfile>,
}

impl MockBackend {
    pub fn new(catalog: ProjectCatalog, profiles: Vec<MockVoterProfile>) -> Self {
        Self { catalog, profiles }
    }

    pub fn profile(&self, agent_index: usize) -> MockVoterProfile {
        self.profiles
            .get(agent_index)
            .cloned()
            .unwrap_or_else(|| MockVoterProfile::baseline(agent_index as u64))
    }
}

impl AgentBackend for MockBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Mock
    }

    fn chat(&self, bundle: &PromptBundle, params: &AgentParams) -> Result<RawResponse, AgentError> {
        params.validate()?;
        let start = Instant::now();
        let profile = self.profile(params.agent_index);
        let list = apply_list_treatment(&self.catalog, bundle.treatment);
        let text = mock_select(&profile, &list, bundle.method, params.temperature, params.seed);
        let thought = bundle.cot_used.then(|| {
            let (top, _) =
                profile
                    .category_weights
                    .iter()
                    .fold((Category::Nature, f64::NEG_INFINITY), |best, (c, w)| {
                        if *w > best.1 {
                            (*c, *w)
                        } else {
                            best
                        }
                    });
            format!(
                "I would favor {} projects, especially in the {} district.",
                top.as_str().to_lowercase(),
                profile.home_district
            )
        });
        Ok(RawResponse {
            text,
            thought,
            turns_echo: bundle.digest(),
            latency: start.elapsed(),
            backend: BackendKind::Mock,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::ListTreatment;
    use crate::parsing::{parse_ballot, BallotContent};
    use crate::prompting::PromptTemplates;

    fn list(t: ListTreatment) -> PresentedList {
        apply_list_treatment(&ProjectCatalog::builtin(), t)
    }

    fn distinct_profile() -> MockVoterProfile {
        // Unique utilities: weights and a district bonus chosen off any common grid.
        MockVoterProfile {
            category_weights: BTreeMap::from([
                (Category::Nature, 0.31),
                (Category::Culture, 1.07),
                (Category::Transportation, 2.13),
            ]),
            home_district: District::Ost,
            district_bonus: 0.77,
            cost_aversion: 0.093,
            noise_seed: 5,
        }
    }

    #[test]
    fn argmax_picks_top_utilities() {
        let p = distinct_profile();
        let l = list(ListTreatment::Original);
        let text = mock_select(&p, &l, VotingMethod::K_APPROVAL, 0.0, 1);
        let mut by_u: Vec<(ProjectId, f64)> = l
            .rows()
            .iter()
            .map(|r| (r.project.id, utility(&p, &r.project)))
            .collect();
        by_u.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let expected: Vec<String> = by_u[..5].iter().map(|(id, _)| format!("#{id}")).collect();
        assert_eq!(text, expected.join(", "));
        // Seed is irrelevant at t = 0.
        assert_eq!(text, mock_select(&p, &l, VotingMethod::K_APPROVAL, 0.0, 99));
    }

    #[test]
    fn argmax_breaks_ties_by_id() {
        let p = MockVoterProfile::baseline(0);
        let text = mock_select(&p, &list(ListTreatment::Original), VotingMethod::K_APPROVAL, 0.0, 0);
        // Transportation at CHF 5000 in all four districts, then the first CHF 10000 one.
        assert_eq!(text, "#5, #11, #17, #23, #6");
    }

    #[test]
    fn treatments_change_labels_not_choices() {
        let p = distinct_profile();
        for method in VotingMethod::ALL {
            let mut outcomes = Vec::new();
            for t in ListTreatment::ALL {
                let l = list(t);
                let text = mock_select(&p, &l, method, 0.0, 3);
                let (ballot, report) = parse_ballot("a", method, &text, &l).unwrap();
                assert!(report.is_clean(), "{method} {t:?}: {text}");
                outcomes.push(ballot.content);
            }
            assert!(outcomes.windows(2).all(|w| w[0] == w[1]), "{method}");
        }
    }

    #[test]
    fn cumulative_at_zero_temperature() {
        let p = distinct_profile();
        let l = list(ListTreatment::Original);
        let text = mock_select(&p, &l, VotingMethod::CUMULATIVE, 0.0, 0);
        let (ballot, report) = parse_ballot("a", VotingMethod::CUMULATIVE, &text, &l).unwrap();
        assert!(report.is_clean());
        let BallotContent::Allocation(m) = ballot.content else {
            panic!()
        };
        assert_eq!(m.values().sum::<f64>(), 10.0);
    }

    #[test]
    fn allocate_points_preserves_budget_exhaustively() {
        // Every weight vector of length 1..=5 over the grid {0.5, 1, ..., 3}.
        let grid: Vec<f64> = (1..=6).map(|i| i as f64 * 0.5).collect();
        for len in 1..=5usize {
            let mut idx = vec![0usize; len];
            loop {
                let w: Vec<f64> = idx.iter().map(|i| grid[*i]).collect();
                let pts = allocate_points(&w, 10);
                assert_eq!(pts.iter().sum::<u32>(), 10, "{w:?}");
                // Proportionality within one point.
                let total: f64 = w.iter().sum();
                for (wi, pi) in w.iter().zip(&pts) {
                    assert!((*pi as f64 - wi / total * 10.0).abs() < 1.0);
                }
                let mut k = 0;
                while k < len {
                    idx[k] += 1;
                    if idx[k] < grid.len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == len {
                    break;
                }
            }
        }
        assert_eq!(allocate_points(&[1.0, 1.0, 1.0], 10), vec![4, 3, 3]);
        assert_eq!(allocate_points(&[0.0, 0.0], 10), vec![10, 0]);
    }

    #[test]
    fn uniform_utilities_give_uniform_first_pick() {
        let p = MockVoterProfile {
            category_weights: BTreeMap::new(),
            home_district: District::Nord,
            district_bonus: 0.0,
            cost_aversion: 0.0,
            noise_seed: 0,
        };
        let l = list(ListTreatment::Original);
        let draws = 24_000;
        let mut counts = BTreeMap::<String, usize>::new();
        for seed in 0..draws {
            let text = mock_select(&p, &l, VotingMethod::RANKED, 1.0, seed);
            *counts.entry(text.split(',').next().unwrap().to_string()).or_default() += 1;
        }
        assert_eq!(counts.len(), 24);
        // Expected 1000 each; sd ~ 31.
        for (id, c) in counts {
            assert!((850..=1150).contains(&c), "{id}: {c}");
        }
    }

    #[test]
    fn higher_utility_tends_to_come_first() {
        let p = distinct_profile();
        let l = list(ListTreatment::Original);
        let util: BTreeMap<u32, f64> = l
            .rows()
            .iter()
            .map(|r| (r.project.id.0, utility(&p, &r.project)))
            .collect();
        // 24 (West Transportation, 10000) vs 17 (Ost Transportation, 5000, home).
        let (a, b) = (17u32, 24u32);
        assert!(util[&a] > util[&b]);
        for t in [0.5, 1.0, 2.0] {
            let mut a_first = 0;
            let draws = 10_000;
            for seed in 0..draws {
                let mut rng = rng_for(&p, seed);
                let util_vec: Vec<_> = util.iter().map(|(id, u)| (ProjectId(*id), *u)).collect();
                let order = peel(&util_vec, t, &mut rng, 24);
                let pa = order.iter().position(|x| x.0 == a).unwrap();
                let pb = order.iter().position(|x| x.0 == b).unwrap();
                if pa < pb {
                    a_first += 1;
                }
            }
            assert!(a_first * 2 > draws, "t={t}: {a_first}");
        }
    }

    #[test]
    fn profile_from_record() {
        let rec = SurveyRecord {
            participant_id: "X".into(),
            category_scores: [
                (Category::Transportation, 60),
                (Category::Nature, 30),
                (Category::Culture, 10),
            ],
            district: District::Nord,
            connectedness: "A lot".into(),
            district_importance: "Moderately important".into(),
            category_importance: "Very important".into(),
            cost_importance: "Not important at all".into(),
            likelihood_importance: "Moderately important".into(),
        };
        let p = MockVoterProfile::from_record(&rec, &MockScales::default(), 7);
        assert_eq!(p.category_weights[&Category::Transportation], 1.8);
        assert_eq!(p.district_bonus, 0.75);
        assert_eq!(p.cost_aversion, 0.0);
        let flat = MockVoterProfile::from_record(
            &rec,
            &MockScales {
                importance_weighted: false,
                ..MockScales::default()
            },
            7,
        );
        assert_eq!(flat.district_bonus, 1.5);
    }

    #[test]
    fn backend_is_deterministic() {
        let backend = MockBackend::new(ProjectCatalog::builtin(), Vec::new());
        let bundle = PromptTemplates::default()
            .assemble(None, VotingMethod::K_APPROVAL, &list(ListTreatment::Original), false)
            .unwrap();
        let params = AgentParams {
            temperature: 1.0,
            seed: 42,
            model_name: "mock".into(),
            agent_index: 3,
        };
        let a = backend.chat(&bundle, &params).unwrap();
        let b = backend.chat(&bundle, &params).unwrap();
        assert_eq!(a.text, b.text);
        assert_eq!(a.backend, BackendKind::Mock);
        assert_eq!(a.turns_echo, bundle.digest());
        let bad = AgentParams {
            temperature: 2.5,
            ..params
        };
        assert!(matches!(backend.chat(&bundle, &bad), Err(AgentError::InvalidParams(_))));
    }
}
