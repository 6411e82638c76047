use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{correlate, permutation_test_stream};
use super::{Instrument, PairingOutcome, ValidationPair};
use crate::clustering::ClusterModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub window_days: u32,
    pub n_perm: usize,
    pub seed: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            window_days: 7,
            n_perm: 10_000,
            seed: 0,
        }
    }
}

/// Correlation between distance to one centroid and one instrument's scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub state: usize,
    pub instrument: Instrument,
    pub r: f64,
    pub p_parametric: f64,
    pub p_permutation: f64,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub k: usize,
    pub window_days: u32,
    pub n_perm: usize,
    pub n_pairs: usize,
    pub dropped_assessments: usize,
    pub excluded_instruments: Vec<Instrument>,
    pub cells: Vec<CellResult>,
    /// Indexed by centroid.
    pub ranking_scores: Vec<f64>,
    /// Indexed by centroid; `"A"` is the best state.
    pub ordinal_labels: Vec<String>,
}

impl ValidationReport {
    pub fn cell(&self, state: usize, instrument: Instrument) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.state == state && c.instrument == instrument)
    }
}

/// Letter for rank position `i` (0 is `A`).
pub fn ordinal_label(i: usize) -> String {
    if i < 26 {
        char::from(b'A' + i as u8).to_string()
    } else {
        format!("S{}", i + 1)
    }
}

/// Mean of orientation-signed correlations per state; `None` for a state
/// without any cell.
pub fn ranking_scores(cells: &[CellResult], k: usize) -> Vec<Option<f64>> {
    let mut acc: Vec<BTreeMap<Instrument, f64>> = vec![BTreeMap::new(); k];
    for c in cells {
        acc[c.state].insert(c.instrument, c.instrument.sign() * c.r);
    }
    acc.iter()
        .map(|m| (!m.is_empty()).then(|| m.values().sum::<f64>() / m.len() as f64))
        .collect()
}

/// Ordinal labels by descending score; ties go to the state with the lower
/// pain coordinate, then the lower index.
pub fn rank_states(scores: &[Option<f64>], pain: &[f64]) -> Result<Vec<String>> {
    let scores: Vec<f64> = scores
        .iter()
        .enumerate()
        .map(|(s, v)| v.ok_or_else(|| Error::UndefinedScore(format!("state {} has no correlations", s + 1))))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then(pain[a].total_cmp(&pain[b]))
            .then(a.cmp(&b))
    });
    let mut labels = vec![String::new(); scores.len()];
    for (rank, &s) in order.iter().enumerate() {
        labels[s] = ordinal_label(rank);
    }
    Ok(labels)
}

fn pain_coordinates(model: &ClusterModel) -> Vec<f64> {
    match model.feature_index("pain") {
        Some(j) => model.centroids.iter().map(|c| c[j]).collect(),
        None => vec![0.0; model.k],
    }
}

/// Correlate distance-to-centroid with every instrument over the pooled
/// pairs and rank the states.
pub fn validate_states(
    model: &ClusterModel,
    pairing: &PairingOutcome,
    cfg: &ValidationConfig,
) -> Result<ValidationReport> {
    model.check()?;
    if let Some(bad) = pairing.pairs.iter().find(|p| p.centroid_distances.len() != model.k) {
        return Err(Error::Dimension {
            expected: model.k,
            found: bad.centroid_distances.len(),
        });
    }
    let mut by_instrument: BTreeMap<Instrument, Vec<&ValidationPair>> = BTreeMap::new();
    for p in &pairing.pairs {
        by_instrument.entry(p.assessment.instrument).or_default().push(p);
    }
    let mut excluded = Vec::new();
    let mut jobs = Vec::new();
    for instrument in Instrument::ALL {
        let pairs = by_instrument.remove(&instrument).unwrap_or_default();
        if pairs.len() < 3 {
            log::warn!("excluding {instrument}: {} pairs", pairs.len());
            excluded.push(instrument);
            continue;
        }
        let scores: Vec<f64> = pairs.iter().map(|p| p.assessment.score).collect();
        for state in 0..model.k {
            let dist: Vec<f64> = pairs.iter().map(|p| p.centroid_distances[state]).collect();
            jobs.push((state, instrument, dist, scores.clone()));
        }
    }

    let cells: Vec<Option<CellResult>> = jobs
        .par_iter()
        .map(|(state, instrument, x, y)| {
            let stream = (*state * Instrument::ALL.len()
                + Instrument::ALL.iter().position(|i| i == instrument).unwrap_or(0)) as u64;
            let (r, p_parametric) = match correlate(x, y) {
                Ok(v) => v,
                Err(Error::UndefinedCorrelation(why)) => {
                    log::warn!("state {} vs {instrument}: {why}", state + 1);
                    return Ok(None);
                }
                Err(e) => return Err(e),
            };
            let p_permutation = permutation_test_stream(x, y, cfg.n_perm, cfg.seed, stream)?;
            Ok(Some(CellResult {
                state: *state,
                instrument: *instrument,
                r,
                p_parametric,
                p_permutation,
                n_pairs: x.len(),
            }))
        })
        .collect::<Result<_>>()?;
    let cells: Vec<CellResult> = cells.into_iter().flatten().collect();

    let scores = ranking_scores(&cells, model.k);
    let ordinal_labels = rank_states(&scores, &pain_coordinates(model))?;
    Ok(ValidationReport {
        k: model.k,
        window_days: cfg.window_days,
        n_perm: cfg.n_perm,
        n_pairs: pairing.pairs.len(),
        dropped_assessments: pairing.dropped,
        excluded_instruments: excluded,
        cells,
        ranking_scores: scores.into_iter().map(|s| s.unwrap_or(f64::NAN)).collect(),
        ordinal_labels,
    })
}
