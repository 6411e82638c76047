use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{compose, FeatureTable, MobilityProfile, NormalizationParams, VoiceScores};
use super::{COMPOSITE_NAMES, EFFECTIVE_MOBILITY};
use crate::error::{Error, Result};
use crate::ingest::CohortTable;

/// Which data streams enter the feature vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Questionnaires,
    Voice,
    Mobility,
    All,
}

impl Modality {
    pub fn uses_mobility(self) -> bool {
        matches!(self, Modality::Mobility | Modality::All)
    }

    pub fn uses_voice(self) -> bool {
        matches!(self, Modality::Voice | Modality::All)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Questionnaires => "questionnaires",
            Modality::Voice => "voice",
            Modality::Mobility => "mobility",
            Modality::All => "all",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "questionnaires" => Ok(Modality::Questionnaires),
            "voice" | "+voice" => Ok(Modality::Voice),
            "mobility" | "+mobility" => Ok(Modality::Mobility),
            "all" => Ok(Modality::All),
            other => Err(Error::config(
                "modality",
                format!("unknown modality `{other}` (questionnaires, voice, mobility, all)"),
            )),
        }
    }
}

/// Row counts at each side of the modality join.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinSummary {
    pub questionnaire_days: usize,
    pub mobility_days: Option<usize>,
    pub voice_days: Option<usize>,
    pub joined: usize,
}

/// Normalize and compose every cohort day, then inner-join the enabled
/// modalities on participant-day.
pub fn assemble_features(
    cohort: &CohortTable,
    params: &NormalizationParams,
    penalty: f64,
    mobility: Option<&[MobilityProfile]>,
    voice: Option<&VoiceScores>,
) -> Result<(FeatureTable, JoinSummary)> {
    let mobility: Option<BTreeMap<(&str, NaiveDate), f64>> = mobility.map(|m| {
        m.iter()
            .map(|p| ((p.participant_id.as_str(), p.date), p.effective_mobility))
            .collect()
    });

    let mut names: Vec<String> = COMPOSITE_NAMES.iter().map(|s| s.to_string()).collect();
    if mobility.is_some() {
        names.push(EFFECTIVE_MOBILITY.to_string());
    }
    if let Some(v) = voice {
        names.extend(v.names.iter().cloned());
    }

    let mut vectors = Vec::with_capacity(cohort.records.len());
    for record in &cohort.records {
        let key = (record.participant_id.as_str(), record.date);
        let em = match &mobility {
            Some(m) => match m.get(&key) {
                Some(&em) => Some(em),
                None => continue,
            },
            None => None,
        };
        let vs = match voice {
            Some(v) => match v.by_day.get(&(record.participant_id.clone(), record.date)) {
                Some(vs) => Some(vs),
                None => continue,
            },
            None => None,
        };
        let mut fv = compose(&params.apply(record)?, &cohort.registry, penalty)?;
        fv.values.extend(em);
        if let Some(vs) = vs {
            fv.values.extend_from_slice(vs);
        }
        vectors.push(fv);
    }

    let summary = JoinSummary {
        questionnaire_days: cohort.records.len(),
        mobility_days: mobility.as_ref().map(BTreeMap::len),
        voice_days: voice.map(|v| v.by_day.len()),
        joined: vectors.len(),
    };
    Ok((FeatureTable::new(names, vectors)?, summary))
}
