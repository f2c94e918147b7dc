use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::aggregation::AggregateResult;
use crate::catalog::ProjectId;
use crate::num::Real;

/// Per-project scores whose order is compared pairwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking<S> {
    pub scores: BTreeMap<ProjectId, S>,
}

impl<S: Real> Ranking<S> {
    pub fn new(scores: BTreeMap<ProjectId, S>) -> Self {
        Self { scores }
    }
}

impl<S: Real> Ranking<S> {
    /// Raw collective scores; ties between projects stay ties.
    pub fn from_scores(result: &AggregateResult<S>) -> Self {
        Self::new(result.scores.clone())
    }
}

/// Positional scores from the collective ranking (top = n, last = 1), so
/// score ties are already broken by ascending id.
impl<S: Real> From<&AggregateResult<S>> for Ranking<S> {
    fn from(result: &AggregateResult<S>) -> Self {
        let n = result.ranking.len();
        Self::new(
            result
                .ranking
                .iter()
                .enumerate()
                .map(|(pos, id)| (*id, S::count(n - pos)))
                .collect(),
        )
    }
}

fn sgn<S: Real>(v: S) -> i64 {
    if v > S::zero() {
        1
    } else if v < S::zero() {
        -1
    } else {
        0
    }
}

/// `2/(n(n-1)) * sum_{i<j} sgn(x_i - x_j) sgn(y_i - y_j)`; tied pairs add 0.
pub fn kendall_tau_scores<S: Real>(x: &[S], y: &[S]) -> Result<S, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::DomainMismatch);
    }
    let n = x.len();
    if n < 2 {
        return Err(MetricsError::TooFewObservations { needed: 2, got: n });
    }
    let mut sum: i64 = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += sgn(x[i] - x[j]) * sgn(y[i] - y[j]);
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(S::lit(sum as f64 / pairs))
}

pub fn kendall_tau<S: Real>(a: &Ranking<S>, b: &Ranking<S>) -> Result<S, MetricsError> {
    if a.scores.len() != b.scores.len() || a.scores.keys().ne(b.scores.keys()) {
        return Err(MetricsError::DomainMismatch);
    }
    let x: Vec<S> = a.scores.values().copied().collect();
    let y: Vec<S> = b.scores.values().copied().collect();
    kendall_tau_scores(&x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranking(v: &[f64]) -> Ranking<f64> {
        Ranking::new(
            v.iter()
                .enumerate()
                .map(|(i, s)| (ProjectId(i as u32 + 1), *s))
                .collect(),
        )
    }

    #[test]
    fn aggregate_conversion_uses_tie_broken_order() {
        let r = AggregateResult {
            scores: [(1, 2.0), (2, 5.0), (3, 2.0)]
                .map(|(i, s)| (ProjectId(i), s))
                .into_iter()
                .collect(),
            ranking: [2, 1, 3].map(ProjectId).to_vec(),
            method: crate::prompting::VotingMethod::Approval,
            n_ballots: 1,
        };
        let pos = Ranking::from(&r);
        assert_eq!(pos.scores.values().copied().collect::<Vec<f64>>(), vec![2.0, 3.0, 1.0]);
        assert_eq!(kendall_tau(&pos, &pos).unwrap(), 1.0);
        let raw = Ranking::from_scores(&r);
        assert!((kendall_tau(&raw, &raw).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identical_and_reversed() {
        let a = ranking(&[4.0, 3.0, 2.0, 1.0, 0.5]);
        let b = ranking(&[0.5, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(kendall_tau(&a, &a).unwrap(), 1.0);
        assert_eq!(kendall_tau(&a, &b).unwrap(), -1.0);
    }

    #[test]
    fn one_swap_of_four() {
        // 6 pairs, one discordant: (5 - 1) / 6.
        let t: f64 = kendall_tau_scores(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((t - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ties_contribute_zero() {
        let t: f64 = kendall_tau_scores(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((t - 2.0 / 3.0).abs() < 1e-15);
        let all_tied = kendall_tau_scores(&[0.0f32; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(all_tied, 0.0);
    }

    #[test]
    fn domain_checks() {
        let a = ranking(&[1.0, 2.0]);
        let mut b = ranking(&[1.0, 2.0]);
        b.scores.insert(ProjectId(9), 0.0);
        assert_eq!(kendall_tau(&a, &b), Err(MetricsError::DomainMismatch));
        let c = Ranking::new(BTreeMap::from([(ProjectId(1), 1.0), (ProjectId(3), 2.0)]));
        assert_eq!(kendall_tau(&a, &c), Err(MetricsError::DomainMismatch));
        assert!(matches!(
            kendall_tau_scores(&[1.0], &[1.0]),
            Err(MetricsError::TooFewObservations { .. })
        ));
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn brute(x: &[i32], y: &[i32]) -> f64 {
        let n = x.len();
        let mut conc = 0i64;
        let mut disc = 0i64;
        for i in 0..n {
            for j in 0..n {
                if i < j {
                    let p = (x[i] - x[j]).signum() * (y[i] - y[j]).signum();
                    if p > 0 {
                        conc += 1;
                    } else if p < 0 {
                        disc += 1;
                    }
                }
            }
        }
        2.0 * (conc - disc) as f64 / (n * (n - 1)) as f64
    }

    fn pair() -> impl Strategy<Value = (Vec<i32>, Vec<i32>)> {
        (2usize..=8).prop_flat_map(|n| {
            (
                proptest::collection::vec(-3i32..4, n),
                proptest::collection::vec(-3i32..4, n),
            )
        })
    }

    proptest! {
        #[test]
        fn matches_pair_counting((x, y) in pair()) {
            let xf: Vec<f64> = x.iter().map(|v| *v as f64).collect();
            let yf: Vec<f64> = y.iter().map(|v| *v as f64).collect();
            prop_assert!((kendall_tau_scores(&xf, &yf).unwrap() - brute(&x, &y)).abs() < 1e-12);
        }

        #[test]
        fn symmetric_and_monotone_invariant((x, y) in pair()) {
            let xf: Vec<f64> = x.iter().map(|v| *v as f64).collect();
            let yf: Vec<f64> = y.iter().map(|v| *v as f64).collect();
            let t = kendall_tau_scores(&xf, &yf).unwrap();
            prop_assert_eq!(t, kendall_tau_scores(&yf, &xf).unwrap());
            let warped: Vec<f64> = xf.iter().map(|v| v.exp() * 3.0 + 1.0).collect();
            prop_assert_eq!(t, kendall_tau_scores(&warped, &yf).unwrap());
            prop_assert!((-1.0..=1.0).contains(&t));
        }

        #[test]
        fn self_tau_is_one_without_ties(perm in Just((0..8).collect::<Vec<i32>>()).prop_shuffle()) {
            let xf: Vec<f64> = perm.iter().map(|v| *v as f64).collect();
            prop_assert_eq!(kendall_tau_scores(&xf, &xf).unwrap(), 1.0);
        }
    }
}
