use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::{csv_reader, expect_header, line_of, non_empty_id, parse_date};

pub const EVENTS_HEADER: [&str; 3] = ["participant_id", "date", "event_type"];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventRecord {
    pub participant_id: String,
    pub date: NaiveDate,
    pub event_type: String,
}

pub fn parse_events<R: Read>(reader: R) -> Result<Vec<EventRecord>> {
    let mut rdr = csv_reader(reader);
    expect_header(rdr.headers()?, &EVENTS_HEADER)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        out.push(EventRecord {
            participant_id: non_empty_id(&row[0], line)?,
            date: parse_date(&row[1], line)?,
            event_type: non_empty_id(&row[2], line)?,
        });
    }
    out.sort();
    Ok(out)
}

pub fn write_events<W: Write>(events: &[EventRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EVENTS_HEADER)?;
    for e in events {
        w.write_record([e.participant_id.as_str(), &e.date.to_string(), &e.event_type])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Earliest event of `event_type` per participant.
pub fn event_dates(events: &[EventRecord], event_type: &str) -> BTreeMap<String, NaiveDate> {
    let mut out = BTreeMap::new();
    for e in events.iter().filter(|e| e.event_type == event_type) {
        out.entry(e.participant_id.clone())
            .and_modify(|d: &mut NaiveDate| *d = (*d).min(e.date))
            .or_insert(e.date);
    }
    out
}
