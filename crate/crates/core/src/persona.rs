//! Survey records and the narrative personas rendered from them.

use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{CatalogError, Category, District};

#[derive(Debug, Error)]
pub enum PersonaError {
    #[error("category scores {0:?} must each lie in 0..=100 and sum to 100")]
    InvalidScoreSum([i32; 3]),
    #[error("categories must be distinct, got {0:?}")]
    DuplicateCategory([Category; 3]),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("survey csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One participant's self-reported preferences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub participant_id: String,
    pub category_scores: [(Category, i32); 3],
    pub district: District,
    pub connectedness: String,
    pub district_importance: String,
    pub category_importance: String,
    pub cost_importance: String,
    pub likelihood_importance: String,
}

impl SurveyRecord {
    pub fn validate(&self) -> Result<(), PersonaError> {
        let scores = self.category_scores.map(|(_, s)| s);
        if scores.iter().any(|s| !(0..=100).contains(s)) || scores.iter().sum::<i32>() != 100 {
            return Err(PersonaError::InvalidScoreSum(scores));
        }
        let cats = self.category_scores.map(|(c, _)| c);
        if cats[0] == cats[1] || cats[0] == cats[2] || cats[1] == cats[2] {
            return Err(PersonaError::DuplicateCategory(cats));
        }
        Ok(())
    }

    pub fn score_of(&self, category: Category) -> i32 {
        self.category_scores
            .iter()
            .find(|(c, _)| *c == category)
            .map_or(0, |(_, s)| *s)
    }

    /// Highest-scored category; ties go to the earlier catalog category.
    pub fn top_category(&self) -> Category {
        self.categories_by_score()[0].0
    }

    /// Categories in descending score, ties in catalog order.
    fn categories_by_score(&self) -> Vec<(Category, i32)> {
        let mut sorted = self.category_scores.to_vec();
        sorted.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        sorted
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaText {
    pub participant_id: String,
    pub text: String,
}

fn topic_name(category: Category) -> &'static str {
    match category {
        Category::Nature => "nature",
        Category::Culture => "culture",
        Category::Transportation => "transport",
    }
}

/// `> 50` is a strong preference, `33..=50` a plain one, below 33 nothing.
pub fn preference_phrase(category: Category, score: i32) -> Option<String> {
    let topic = topic_name(category);
    if score > 50 {
        Some(format!("have a strong preference for {topic}"))
    } else if score >= 33 {
        Some(format!("prefer {topic}"))
    } else {
        None
    }
}

fn join_list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

pub fn build_persona(record: &SurveyRecord) -> Result<PersonaText, PersonaError> {
    record.validate()?;
    let mut text = format!(
        "You are a university student from {} district in Zurich.",
        record.district
    );
    let phrases: Vec<String> = record
        .categories_by_score()
        .into_iter()
        .filter_map(|(c, s)| preference_phrase(c, s))
        .collect();
    // Three scores below 33 cannot sum to 100.
    debug_assert!(!phrases.is_empty());
    if !phrases.is_empty() {
        text.push_str(&format!(" In urban topics, you {}.", join_list(&phrases)));
    }
    text.push_str(&format!(
        " When deciding on projects, you find the district to be {}, the urban category {}, and the cost of the project {}.",
        record.district_importance.trim().to_lowercase(),
        record.category_importance.trim().to_lowercase(),
        record.cost_importance.trim().to_lowercase(),
    ));
    Ok(PersonaText {
        participant_id: record.participant_id.clone(),
        text,
    })
}

#[derive(Debug, Deserialize, Serialize)]
struct SurveyRow {
    id: String,
    cat1: String,
    cat1_score: i32,
    cat2: String,
    cat2_score: i32,
    cat3: String,
    cat3_score: i32,
    district: String,
    connected: String,
    district_importance: String,
    category_importance: String,
    cost_importance: String,
    likelihood_importance: String,
}

/// Reads the survey CSV, validating every record.
pub fn load_survey<R: Read>(source: R) -> Result<Vec<SurveyRecord>, PersonaError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let mut out = Vec::new();
    for row in reader.deserialize::<SurveyRow>() {
        let row = row?;
        let record = SurveyRecord {
            participant_id: row.id,
            category_scores: [
                (row.cat1.parse()?, row.cat1_score),
                (row.cat2.parse()?, row.cat2_score),
                (row.cat3.parse()?, row.cat3_score),
            ],
            district: row.district.parse()?,
            connectedness: row.connected,
            district_importance: row.district_importance,
            category_importance: row.category_importance,
            cost_importance: row.cost_importance,
            likelihood_importance: row.likelihood_importance,
        };
        record.validate()?;
        out.push(record);
    }
    Ok(out)
}

fn survey_label(category: Category) -> &'static str {
    match category {
        Category::Transportation => "Transport",
        other => other.as_str(),
    }
}

/// Writes records in the survey CSV layout accepted by [`load_survey`].
pub fn write_survey<W: std::io::Write>(records: &[SurveyRecord], sink: W) -> Result<(), PersonaError> {
    let mut writer = csv::Writer::from_writer(sink);
    for r in records {
        let [(c1, s1), (c2, s2), (c3, s3)] = r.category_scores;
        writer.serialize(SurveyRow {
            id: r.participant_id.clone(),
            cat1: survey_label(c1).into(),
            cat1_score: s1,
            cat2: survey_label(c2).into(),
            cat2_score: s2,
            cat3: survey_label(c3).into(),
            cat3_score: s3,
            district: r.district.to_string(),
            connected: r.connectedness.clone(),
            district_importance: r.district_importance.clone(),
            category_importance: r.category_importance.clone(),
            cost_importance: r.cost_importance.clone(),
            likelihood_importance: r.likelihood_importance.clone(),
        })?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}
