use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::{Category, District};
use crate::persona::SurveyRecord;

const IMPORTANCE: [&str; 5] = [
    "Not important at all",
    "Slightly important",
    "Moderately important",
    "Very important",
    "Extremely important",
];

const CONNECTEDNESS: [&str; 4] = ["Not at all", "A little", "Somewhat", "A lot"];

/// A reproducible stand-in survey for mock populations. Districts are
/// assigned round-robin so every district has the same head count (±1);
/// category scores are a uniform random split of 100.
pub fn synthetic_survey(n: usize, seed: u64) -> Vec<SurveyRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let (a, b) = (rng.random_range(0..=100), rng.random_range(0..=100));
            let (lo, hi) = (a.min(b), a.max(b));
            let mut scores = [lo, hi - lo, 100 - hi];
            scores.sort_unstable_by(|x, y| y.cmp(x));
            let mut cats = Category::ALL;
            cats.shuffle(&mut rng);
            let mut pick = |options: &[&str]| options[rng.random_range(0..options.len())].to_string();
            SurveyRecord {
                participant_id: format!("SYN{i:05}"),
                category_scores: [(cats[0], scores[0]), (cats[1], scores[1]), (cats[2], scores[2])],
                district: District::ALL[i % District::ALL.len()],
                connectedness: pick(&CONNECTEDNESS),
                district_importance: pick(&IMPORTANCE),
                category_importance: pick(&IMPORTANCE),
                cost_importance: pick(&IMPORTANCE),
                likelihood_importance: pick(&IMPORTANCE),
            }
        })
        .collect()
}
