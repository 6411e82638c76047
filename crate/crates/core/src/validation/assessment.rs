use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{csv_reader, expect_header, line_of, non_empty_id, parse_date, parse_f64};

pub const ASSESSMENTS_HEADER: [&str; 4] = ["participant_id", "date", "instrument", "score"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Instrument {
    #[serde(rename = "ODI")]
    Odi,
    #[serde(rename = "EQ5D_PAIN")]
    Eq5dPain,
    #[serde(rename = "EQ5D_ACTIVITIES")]
    Eq5dActivities,
    #[serde(rename = "EQ5D_VAS_HEALTH")]
    Eq5dVasHealth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherIsWorse,
    HigherIsBetter,
}

impl Instrument {
    pub const ALL: [Instrument; 4] = [Self::Odi, Self::Eq5dPain, Self::Eq5dActivities, Self::Eq5dVasHealth];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Odi => "ODI",
            Self::Eq5dPain => "EQ5D_PAIN",
            Self::Eq5dActivities => "EQ5D_ACTIVITIES",
            Self::Eq5dVasHealth => "EQ5D_VAS_HEALTH",
        }
    }

    pub fn orientation(self) -> Orientation {
        match self {
            Self::Eq5dVasHealth => Orientation::HigherIsBetter,
            _ => Orientation::HigherIsWorse,
        }
    }

    /// `+1` when higher scores are worse, `-1` otherwise.
    pub fn sign(self) -> f64 {
        match self.orientation() {
            Orientation::HigherIsWorse => 1.0,
            Orientation::HigherIsBetter => -1.0,
        }
    }
}

impl fmt::Display for Instrument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Instrument {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|i| i.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown instrument `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentRecord {
    pub participant_id: String,
    pub date: NaiveDate,
    pub instrument: Instrument,
    pub score: f64,
}

impl AssessmentRecord {
    pub fn orientation(&self) -> Orientation {
        self.instrument.orientation()
    }
}

/// Read `participant_id,date,instrument,score`; output is sorted by
/// participant, date and instrument.
pub fn parse_assessments<R: Read>(reader: R) -> Result<Vec<AssessmentRecord>> {
    let mut rdr = csv_reader(reader);
    expect_header(rdr.headers()?, &ASSESSMENTS_HEADER)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        let instrument = row[2].parse().map_err(|message| Error::Parse { line, message })?;
        out.push(AssessmentRecord {
            participant_id: non_empty_id(&row[0], line)?,
            date: parse_date(&row[1], line)?,
            instrument,
            score: parse_f64(&row[3], "score", line)?,
        });
    }
    out.sort_by(|a, b| (&a.participant_id, a.date, a.instrument).cmp(&(&b.participant_id, b.date, b.instrument)));
    Ok(out)
}

pub fn write_assessments<W: Write>(records: &[AssessmentRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ASSESSMENTS_HEADER)?;
    for r in records {
        w.write_record([
            r.participant_id.as_str(),
            &r.date.to_string(),
            r.instrument.as_str(),
            &r.score.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
