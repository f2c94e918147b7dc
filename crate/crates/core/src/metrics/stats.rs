use serde::{Deserialize, Serialize};

use super::special::student_t_two_sided;
use super::MetricsError;
use crate::aggregation::AggregateResult;
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatResult<S> {
    pub statistic: S,
    /// Two-sided.
    pub p_value: S,
    pub dof: S,
}

fn mean<S: Real>(v: &[S]) -> S {
    v.iter().fold(S::zero(), |a, x| a + *x) / S::count(v.len())
}

/// Sample variance (n - 1 denominator).
fn variance<S: Real>(v: &[S], m: S) -> S {
    v.iter().fold(S::zero(), |a, x| a + (*x - m) * (*x - m)) / S::count(v.len() - 1)
}

/// Pearson correlation with the two-sided p-value of `t = r sqrt((n-2)/(1-r^2))`
/// on `n - 2` degrees of freedom.
pub fn pearson_r<S: Real>(x: &[S], y: &[S]) -> Result<StatResult<S>, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::DegenerateInput("length mismatch"));
    }
    let n = x.len();
    if n < 3 {
        return Err(MetricsError::TooFewObservations { needed: 3, got: n });
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxx = S::zero();
    let mut syy = S::zero();
    let mut sxy = S::zero();
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (*a - mx, *b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= S::zero() || syy <= S::zero() {
        return Err(MetricsError::DegenerateInput("zero variance"));
    }
    let r = (sxy / (sxx * syy).sqrt()).max(-S::one()).min(S::one());
    let dof = S::count(n - 2);
    let p_value = if r.abs() == S::one() {
        S::zero()
    } else {
        let t = r * (dof / (S::one() - r * r)).sqrt();
        student_t_two_sided(t, dof)
    };
    Ok(StatResult {
        statistic: r,
        p_value,
        dof,
    })
}

/// Correlation between collective rank position (1 = top) and canonical id.
pub fn rank_id_correlation<S: Real>(result: &AggregateResult<S>) -> Result<StatResult<S>, MetricsError> {
    let positions: Vec<S> = (1..=result.ranking.len()).map(S::count).collect();
    let ids: Vec<S> = result.ranking.iter().map(|id| S::count(id.0 as usize)).collect();
    pearson_r(&positions, &ids)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TTestKind {
    /// Unequal variances, Welch-Satterthwaite degrees of freedom.
    #[default]
    Welch,
    /// Pooled variance, `n_a + n_b - 2` degrees of freedom.
    Pooled,
}

/// Welch two-sample t-test.
pub fn t_test<S: Real>(a: &[S], b: &[S]) -> Result<StatResult<S>, MetricsError> {
    t_test_with(a, b, TTestKind::Welch)
}

pub fn t_test_with<S: Real>(a: &[S], b: &[S], kind: TTestKind) -> Result<StatResult<S>, MetricsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(MetricsError::TooFewObservations {
                needed: 2,
                got: s.len(),
            });
        }
    }
    let (na, nb) = (S::count(a.len()), S::count(b.len()));
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (variance(a, ma), variance(b, mb));
    if va <= S::zero() && vb <= S::zero() {
        return Err(MetricsError::DegenerateInput("zero variance in both samples"));
    }
    let one = S::one();
    let (se2, dof) = match kind {
        TTestKind::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let se2 = qa + qb;
            let dof = se2 * se2 / (qa * qa / (na - one) + qb * qb / (nb - one));
            (se2, dof)
        }
        TTestKind::Pooled => {
            let dof = na + nb - S::lit(2.0);
            let pooled = ((na - one) * va + (nb - one) * vb) / dof;
            (pooled * (one / na + one / nb), dof)
        }
    };
    let statistic = (ma - mb) / se2.sqrt();
    Ok(StatResult {
        statistic,
        p_value: student_t_two_sided(statistic, dof),
        dof,
    })
}
