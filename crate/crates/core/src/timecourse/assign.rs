use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rank_order;
use crate::clustering::ClusterModel;
use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::io::{csv_reader, line_of, non_empty_id, parse_date, parse_f64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimecourseEntry {
    pub date: NaiveDate,
    /// Centroid index in the model.
    pub state: usize,
    pub label: String,
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateTimecourse {
    pub participant_id: String,
    pub entries: Vec<TimecourseEntry>,
}

/// Label every day with its nearest centroid. Equidistant centroids resolve
/// to the better-ranked state.
pub fn assign_states(model: &ClusterModel, table: &FeatureTable) -> Result<Vec<StateTimecourse>> {
    model.check()?;
    model.check_features(table)?;
    let labels = model
        .ranking
        .as_ref()
        .ok_or_else(|| Error::Schema("model has no ordinal labels; validate it first".into()))?;
    let order = rank_order(labels);

    let mut by_participant: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, v) in table.vectors.iter().enumerate() {
        by_participant.entry(&v.participant_id).or_default().push(i);
    }
    by_participant
        .into_par_iter()
        .map(|(pid, rows)| {
            let mut entries = Vec::with_capacity(rows.len());
            for i in rows {
                let v = &table.vectors[i];
                let distances = model.distances(&v.values)?;
                let mut state = order[0];
                for &s in &order[1..] {
                    if distances[s] < distances[state] {
                        state = s;
                    }
                }
                entries.push(TimecourseEntry {
                    date: v.date,
                    state,
                    label: labels[state].clone(),
                    distances,
                });
            }
            entries.sort_by_key(|e| e.date);
            if entries.windows(2).any(|w| w[0].date == w[1].date) {
                return Err(Error::Invariant(format!("duplicate day for participant {pid}")));
            }
            Ok(StateTimecourse {
                participant_id: pid.to_string(),
                entries,
            })
        })
        .collect()
}

/// `participant_id,date,state_label,dist_1..dist_k`.
pub fn write_assignments<W: Write>(timecourses: &[StateTimecourse], k: usize, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["participant_id".to_string(), "date".into(), "state_label".into()];
    header.extend((1..=k).map(|i| format!("dist_{i}")));
    w.write_record(&header)?;
    for tc in timecourses {
        for e in &tc.entries {
            let mut row = vec![tc.participant_id.clone(), e.date.to_string(), e.label.clone()];
            row.extend(e.distances.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Inverse of [`write_assignments`]. The centroid index is recovered from
/// `labels`, the model's ordinal labels.
pub fn read_assignments<R: Read>(reader: R, labels: &[String]) -> Result<Vec<StateTimecourse>> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers()?.clone();
    let k = labels.len();
    let mut expected = vec!["participant_id".to_string(), "date".into(), "state_label".into()];
    expected.extend((1..=k).map(|i| format!("dist_{i}")));
    if headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Schema(format!(
            "expected header `{}`, found `{}`",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out: BTreeMap<String, Vec<TimecourseEntry>> = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        let label = row[2].to_string();
        let state = labels.iter().position(|l| *l == label).ok_or_else(|| Error::Parse {
            line,
            message: format!("unknown state label `{label}`"),
        })?;
        let distances = (0..k)
            .map(|i| parse_f64(&row[3 + i], "distance", line))
            .collect::<Result<_>>()?;
        out.entry(non_empty_id(&row[0], line)?)
            .or_default()
            .push(TimecourseEntry {
                date: parse_date(&row[1], line)?,
                state,
                label,
                distances,
            });
    }
    Ok(out
        .into_iter()
        .map(|(participant_id, mut entries)| {
            entries.sort_by_key(|e| e.date);
            StateTimecourse {
                participant_id,
                entries,
            }
        })
        .collect())
}
