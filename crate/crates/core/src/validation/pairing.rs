use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::AssessmentRecord;
use crate::clustering::ClusterModel;
use crate::error::Result;
use crate::features::{FeatureTable, FeatureVector};

/// A clustered day with its distance to every centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDay {
    pub participant_id: String,
    pub date: NaiveDate,
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationPair {
    pub participant_id: String,
    pub sample_date: NaiveDate,
    pub assessment: AssessmentRecord,
    pub centroid_distances: Vec<f64>,
    /// `sample_date - assessment.date` in days.
    pub day_gap: i64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairingOutcome {
    pub pairs: Vec<ValidationPair>,
    pub dropped: usize,
}

pub fn centroid_distances(model: &ClusterModel, vector: &FeatureVector) -> Result<Vec<f64>> {
    model.distances(&vector.values)
}

/// Distances from every row of `table` to the model's centroids.
pub fn sample_days(model: &ClusterModel, table: &FeatureTable) -> Result<Vec<SampleDay>> {
    model.check_features(table)?;
    table
        .vectors
        .iter()
        .map(|v| {
            Ok(SampleDay {
                participant_id: v.participant_id.clone(),
                date: v.date,
                distances: centroid_distances(model, v)?,
            })
        })
        .collect()
}

/// Pair each assessment with the participant's nearest sample day within
/// `window_days`; equidistant days resolve to the earlier one. Assessments
/// with nothing in range are counted as dropped.
pub fn pair_assessments(samples: &[SampleDay], assessments: &[AssessmentRecord], window_days: u32) -> PairingOutcome {
    let mut by_participant: BTreeMap<&str, BTreeMap<NaiveDate, &SampleDay>> = BTreeMap::new();
    for s in samples {
        by_participant.entry(&s.participant_id).or_default().insert(s.date, s);
    }
    let window = chrono::TimeDelta::days(window_days.into());
    let mut out = PairingOutcome::default();
    for a in assessments {
        let nearest = by_participant.get(a.participant_id.as_str()).and_then(|days| {
            days.range(a.date - window..=a.date + window)
                .map(|(d, s)| ((*d - a.date).num_days(), *s))
                // min_by_key keeps the first minimum, and the range is date-ordered
                .min_by_key(|(gap, _)| gap.abs())
        });
        match nearest {
            Some((day_gap, s)) => out.pairs.push(ValidationPair {
                participant_id: a.participant_id.clone(),
                sample_date: s.date,
                assessment: a.clone(),
                centroid_distances: s.distances.clone(),
                day_gap,
            }),
            None => out.dropped += 1,
        }
    }
    out
}
