use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::ingest::{Category, DailyRecord, QuestionRegistry};

/// Questionnaire composites, in feature-vector order.
pub const COMPOSITE_NAMES: [&str; 6] = ["pain", "mood", "sleep", "alertness", "medication", "activity"];

/// Weight on pain interference in the activity difference score.
pub const DEFAULT_PENALTY: f64 = 1.0;

fn category_mean(record: &DailyRecord, registry: &QuestionRegistry, category: Category) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for q in registry.in_category(category) {
        let v = record
            .responses
            .get(&q.question_id)
            .ok_or_else(|| Error::Completeness {
                participant: record.participant_id.clone(),
                date: record.date,
                missing: q.question_id.clone(),
            })?;
        sum += v;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Completeness {
            participant: record.participant_id.clone(),
            date: record.date,
            missing: format!("category {}", category.as_str()),
        });
    }
    Ok(sum / n as f64)
}

/// Build the six composites from a normalized record. Every category is the
/// mean of its questions except activity, which is
/// `mean(ADL) - penalty * mean(pain interference)`.
pub fn compose(normalized: &DailyRecord, registry: &QuestionRegistry, penalty: f64) -> Result<FeatureVector> {
    let m = |c| category_mean(normalized, registry, c);
    let activity = m(Category::ActivityAdl)? - penalty * m(Category::ActivityInterference)?;
    Ok(FeatureVector {
        participant_id: normalized.participant_id.clone(),
        date: normalized.date,
        values: vec![
            m(Category::Pain)?,
            m(Category::Mood)?,
            m(Category::Sleep)?,
            m(Category::Alertness)?,
            m(Category::Medication)?,
            activity,
        ],
    })
}
