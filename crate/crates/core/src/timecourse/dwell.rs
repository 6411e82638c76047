use std::collections::BTreeMap;

use chrono::{NaiveDate, TimeDelta};
use serde::{Deserialize, Serialize};

use super::{rank_order, StateTimecourse};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DwellConfig {
    pub pre_days: u32,
    pub post_days: u32,
    pub event_type: String,
}

impl Default for DwellConfig {
    fn default() -> Self {
        Self {
            pre_days: 30,
            post_days: 30,
            event_type: "scs_activation".into(),
        }
    }
}

/// Share of assigned days in each state before and after an event.
/// Vectors are indexed like `labels`, best state first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwellContrast {
    pub participant_id: String,
    pub event_date: NaiveDate,
    pub pre_window: u32,
    pub post_window: u32,
    pub labels: Vec<String>,
    pub pre_assigned: usize,
    pub post_assigned: usize,
    pub pre_fractions: Vec<f64>,
    pub post_fractions: Vec<f64>,
    pub delta: Vec<f64>,
    /// Either window had no assigned day; its fractions are all zero.
    pub empty: bool,
}

/// Fractions over `[event - pre_days, event)` and `(event, event + post_days]`.
/// `labels` are the model's ordinal labels in centroid order.
pub fn dwell_contrast(
    timecourse: &StateTimecourse,
    labels: &[String],
    event_date: NaiveDate,
    pre_days: u32,
    post_days: u32,
) -> Result<DwellContrast> {
    if pre_days == 0 {
        return Err(Error::config("pre_days", "must be at least 1"));
    }
    if post_days == 0 {
        return Err(Error::config("post_days", "must be at least 1"));
    }
    let order = rank_order(labels);
    let mut position = vec![0; labels.len()];
    for (rank, &s) in order.iter().enumerate() {
        position[s] = rank;
    }
    let pre_start = event_date - TimeDelta::days(pre_days.into());
    let post_end = event_date + TimeDelta::days(post_days.into());
    let mut pre = vec![0usize; labels.len()];
    let mut post = vec![0usize; labels.len()];
    for e in &timecourse.entries {
        if e.date >= pre_start && e.date < event_date {
            pre[position[e.state]] += 1;
        } else if e.date > event_date && e.date <= post_end {
            post[position[e.state]] += 1;
        }
    }
    let fractions = |counts: &[usize]| -> (usize, Vec<f64>) {
        let total: usize = counts.iter().sum();
        let f = counts
            .iter()
            .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
            .collect();
        (total, f)
    };
    let (pre_assigned, pre_fractions) = fractions(&pre);
    let (post_assigned, post_fractions) = fractions(&post);
    let empty = pre_assigned == 0 || post_assigned == 0;
    let delta = if empty {
        vec![0.0; labels.len()]
    } else {
        post_fractions.iter().zip(&pre_fractions).map(|(b, a)| b - a).collect()
    };
    Ok(DwellContrast {
        participant_id: timecourse.participant_id.clone(),
        event_date,
        pre_window: pre_days,
        post_window: post_days,
        labels: order.iter().map(|&s| labels[s].clone()).collect(),
        pre_assigned,
        post_assigned,
        pre_fractions,
        post_fractions,
        delta,
        empty,
    })
}

/// Contrasts for every timecourse with an event. With `require_all`, a
/// participant without an event is an error instead of being skipped.
pub fn dwell_contrasts(
    timecourses: &[StateTimecourse],
    labels: &[String],
    events: &BTreeMap<String, NaiveDate>,
    cfg: &DwellConfig,
    require_all: bool,
) -> Result<Vec<DwellContrast>> {
    let mut out = Vec::new();
    for tc in timecourses {
        match events.get(&tc.participant_id) {
            Some(&date) => out.push(dwell_contrast(tc, labels, date, cfg.pre_days, cfg.post_days)?),
            None if require_all => {
                return Err(Error::MissingEvent(format!(
                    "no `{}` event for participant {}",
                    cfg.event_type, tc.participant_id
                )))
            }
            None => {}
        }
    }
    Ok(out)
}
