use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::align::{align_centroids, Alignment};
use super::ari::adjusted_rand_index;
use super::kmeans::{kmeans, KMeansConfig};
use super::model::ClusterModel;
use crate::error::Result;
use crate::features::FeatureTable;

/// Minimum samples per cluster for a split to be refitted.
pub const MIN_SAMPLES_PER_CLUSTER: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalWindow {
    /// Every day before the event.
    PreEvent,
    /// `[event, event + 6 months)`.
    EarlyPost,
    /// `[event + 6 months, event + 12 months)`.
    LatePost,
}

impl TemporalWindow {
    pub const ALL: [TemporalWindow; 3] = [Self::PreEvent, Self::EarlyPost, Self::LatePost];

    pub fn contains(self, date: NaiveDate, event: NaiveDate) -> bool {
        let six = event + chrono::Months::new(6);
        let twelve = event + chrono::Months::new(12);
        match self {
            Self::PreEvent => date < event,
            Self::EarlyPost => date >= event && date < six,
            Self::LatePost => date >= six && date < twelve,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Split {
    All,
    HighRespondersExcluded {
        /// Responses per day above which a participant is excluded.
        threshold: f64,
        excluded: Vec<String>,
    },
    TemporalWindow {
        window: TemporalWindow,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub split: Split,
    pub n_samples: usize,
    /// `alignment.mapping[i]` is the split centroid matched to reference
    /// centroid `i`.
    pub alignment: Alignment,
    pub centroid_similarity: Vec<f64>,
    /// Refitted split centroids, reordered to match the reference.
    pub aligned_centroids: Vec<Vec<f64>>,
    /// Agreement on the split's rows between the reference model's
    /// nearest-centroid labels and the refit's labels.
    pub ari_to_reference: f64,
}

/// Participants whose mean responses per day exceed mean + 2 SD of the
/// cohort (population SD).
pub fn high_responders(rates: &BTreeMap<String, f64>) -> (f64, Vec<String>) {
    let n = rates.len() as f64;
    if n == 0.0 {
        return (f64::INFINITY, Vec::new());
    }
    let mean = rates.values().sum::<f64>() / n;
    let sd = (rates.values().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    let threshold = mean + 2.0 * sd;
    let out = rates
        .iter()
        .filter(|(_, &r)| r > threshold)
        .map(|(p, _)| p.clone())
        .collect();
    (threshold, out)
}

fn refit(
    table: &FeatureTable,
    split: Split,
    reference: &ClusterModel,
    cfg: &KMeansConfig,
) -> Result<Option<RobustnessReport>> {
    let need = reference.k * MIN_SAMPLES_PER_CLUSTER;
    if table.len() < need {
        log::warn!(
            "skipping robustness split {split:?}: {} samples, need {need}",
            table.len()
        );
        return Ok(None);
    }
    let x = table.matrix();
    let fit = kmeans(x.view(), &KMeansConfig { k: reference.k, ..*cfg })?;
    let centroids: Vec<Vec<f64>> = fit.centroids.rows().into_iter().map(|r| r.to_vec()).collect();
    let alignment = align_centroids(&reference.centroids, &centroids)?;
    let reference_labels = reference.predict(x.view())?;
    Ok(Some(RobustnessReport {
        split,
        n_samples: table.len(),
        centroid_similarity: alignment.cosine.clone(),
        aligned_centroids: alignment.mapping.iter().map(|&j| centroids[j].clone()).collect(),
        ari_to_reference: adjusted_rand_index(&reference_labels, &fit.labels),
        alignment,
    }))
}

#[derive(Debug, Clone, Default)]
pub struct RobustnessInputs<'a> {
    /// Responses per day for each participant.
    pub response_rates: Option<&'a BTreeMap<String, f64>>,
    /// Anchor date per participant for the temporal windows.
    pub events: Option<&'a BTreeMap<String, NaiveDate>>,
}

/// Refit at the reference k on the full data, without high responders and
/// within each temporal window that has data. Splits with fewer than
/// `k * 10` rows are skipped.
pub fn robustness_splits(
    table: &FeatureTable,
    inputs: &RobustnessInputs,
    reference: &ClusterModel,
    cfg: &KMeansConfig,
) -> Result<Vec<RobustnessReport>> {
    reference.check()?;
    reference.check_features(table)?;
    let mut out = Vec::new();
    out.extend(refit(table, Split::All, reference, cfg)?);

    if let Some(rates) = inputs.response_rates {
        let (threshold, excluded) = high_responders(rates);
        let kept = table.filter(|v| !excluded.contains(&v.participant_id));
        let split = Split::HighRespondersExcluded { threshold, excluded };
        out.extend(refit(&kept, split, reference, cfg)?);
    }

    if let Some(events) = inputs.events {
        for window in TemporalWindow::ALL {
            let part = table.filter(|v| {
                events
                    .get(&v.participant_id)
                    .is_some_and(|&e| window.contains(v.date, e))
            });
            out.extend(refit(&part, Split::TemporalWindow { window }, reference, cfg)?);
        }
    }
    Ok(out)
}
