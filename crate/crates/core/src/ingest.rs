//! Parsing of raw response streams, same-day aggregation and the
//! completeness rules that decide which participant-days enter the analysis.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{csv_reader, expect_header, line_of, non_empty_id, parse_date, parse_f64};

pub const RECORDS_HEADER: [&str; 4] = ["participant_id", "date", "question_id", "value"];
pub const QUESTIONS_HEADER: [&str; 5] = ["question_id", "category", "scale_min", "scale_max", "polarity"];
pub const DEMOGRAPHICS_HEADER: [&str; 3] = ["participant_id", "age", "sex"];

/// Questionnaire category a question contributes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Pain,
    Mood,
    Sleep,
    Alertness,
    Medication,
    ActivityAdl,
    ActivityInterference,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Pain,
        Category::Mood,
        Category::Sleep,
        Category::Alertness,
        Category::Medication,
        Category::ActivityAdl,
        Category::ActivityInterference,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Pain => "pain",
            Category::Mood => "mood",
            Category::Sleep => "sleep",
            Category::Alertness => "alertness",
            Category::Medication => "medication",
            Category::ActivityAdl => "activity_adl",
            Category::ActivityInterference => "activity_interference",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    HigherIsBetter,
    HigherIsWorse,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::HigherIsBetter => "higher_is_better",
            Polarity::HigherIsWorse => "higher_is_worse",
        }
    }

    pub fn parse(s: &str) -> Option<Polarity> {
        match s {
            "higher_is_better" => Some(Polarity::HigherIsBetter),
            "higher_is_worse" => Some(Polarity::HigherIsWorse),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionSpec {
    pub question_id: String,
    pub category: Category,
    pub scale_min: f64,
    pub scale_max: f64,
    pub polarity: Polarity,
}

/// Ordered, validated set of questions. Lookup by id is `O(log n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuestionRegistry {
    questions: Vec<QuestionSpec>,
    index: BTreeMap<String, usize>,
}

impl QuestionRegistry {
    pub fn new(questions: Vec<QuestionSpec>) -> Result<Self> {
        if questions.is_empty() {
            return Err(Error::Schema("question registry is empty".into()));
        }
        let mut index = BTreeMap::new();
        for (i, q) in questions.iter().enumerate() {
            if q.question_id.is_empty() {
                return Err(Error::Schema("empty question_id".into()));
            }
            if !(q.scale_min < q.scale_max) {
                return Err(Error::Schema(format!(
                    "question `{}`: scale_min {} must be below scale_max {}",
                    q.question_id, q.scale_min, q.scale_max
                )));
            }
            if index.insert(q.question_id.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate question `{}`", q.question_id)));
            }
        }
        Ok(Self { questions, index })
    }

    pub fn get(&self, question_id: &str) -> Option<&QuestionSpec> {
        self.index.get(question_id).map(|&i| &self.questions[i])
    }

    pub fn questions(&self) -> &[QuestionSpec] {
        &self.questions
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.questions.iter().map(|q| q.question_id.as_str())
    }

    pub fn in_category(&self, category: Category) -> impl Iterator<Item = &QuestionSpec> {
        self.questions.iter().filter(move |q| q.category == category)
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv_reader(reader);
        expect_header(rdr.headers()?, &QUESTIONS_HEADER)?;
        let mut questions = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let line = line_of(&row);
            let category = Category::parse(&row[1]).ok_or_else(|| Error::Parse {
                line,
                message: format!("unknown category `{}`", &row[1]),
            })?;
            let polarity = Polarity::parse(&row[4]).ok_or_else(|| Error::Parse {
                line,
                message: format!("unknown polarity `{}`", &row[4]),
            })?;
            questions.push(QuestionSpec {
                question_id: row[0].to_string(),
                category,
                scale_min: parse_f64(&row[2], "scale_min", line)?,
                scale_max: parse_f64(&row[3], "scale_max", line)?,
                polarity,
            });
        }
        Self::new(questions)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(QUESTIONS_HEADER)?;
        for q in &self.questions {
            w.write_record([
                q.question_id.as_str(),
                q.category.as_str(),
                &q.scale_min.to_string(),
                &q.scale_max.to_string(),
                q.polarity.as_str(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// One participant-day of raw responses before same-day averaging. Values
/// for each question are kept sorted so that downstream sums do not depend
/// on input row order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDailyRecord {
    pub participant_id: String,
    pub date: NaiveDate,
    pub responses: BTreeMap<String, Vec<f64>>,
}

impl RawDailyRecord {
    /// Number of response submissions that day (the largest per-question count).
    pub fn submissions(&self) -> usize {
        self.responses.values().map(Vec::len).max().unwrap_or(0)
    }
}

/// One participant-day with a single value per question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub participant_id: String,
    pub date: NaiveDate,
    pub responses: BTreeMap<String, f64>,
}

/// Options that control how raw timestamps map onto calendar days.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParseOptions {
    /// Responses with a timestamp before this hour count towards the
    /// previous calendar day. `0` means local midnight.
    pub day_start_hour: u32,
}

fn parse_day(field: &str, opts: &ParseOptions, line: u64) -> Result<NaiveDate> {
    if field.len() == 10 {
        return parse_date(field, line);
    }
    const FORMATS: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M",
    ];
    let ts = FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(field, f).ok())
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("`{field}` is not an ISO-8601 date or timestamp"),
        })?;
    Ok((ts - TimeDelta::hours(i64::from(opts.day_start_hour))).date())
}

/// Parse a `participant_id,date,question_id,value` stream into one raw record
/// per participant-day, sorted by participant and date.
pub fn parse_daily_records<R: Read>(
    reader: R,
    registry: &QuestionRegistry,
    opts: &ParseOptions,
) -> Result<Vec<RawDailyRecord>> {
    let mut rdr = csv_reader(reader);
    expect_header(rdr.headers()?, &RECORDS_HEADER)?;
    let mut days: BTreeMap<(String, NaiveDate), BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = line_of(&row);
        if row.len() != RECORDS_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 fields, found {}", row.len()),
            });
        }
        let participant = non_empty_id(&row[0], line)?;
        let date = parse_day(&row[1], opts, line)?;
        let question = registry
            .get(&row[2])
            .ok_or_else(|| Error::Schema(format!("line {line}: unknown question_id `{}`", &row[2])))?;
        let value = parse_f64(&row[3], "value", line)?;
        if value < question.scale_min || value > question.scale_max {
            return Err(Error::Range {
                line,
                question: question.question_id.clone(),
                value,
                min: question.scale_min,
                max: question.scale_max,
            });
        }
        days.entry((participant, date))
            .or_default()
            .entry(question.question_id.clone())
            .or_default()
            .push(value);
    }
    Ok(days
        .into_iter()
        .map(|((participant_id, date), mut responses)| {
            for values in responses.values_mut() {
                values.sort_by(f64::total_cmp);
            }
            RawDailyRecord {
                participant_id,
                date,
                responses,
            }
        })
        .collect())
}

/// Replace each question's same-day values by their arithmetic mean.
pub fn aggregate_daily(records: &[RawDailyRecord]) -> Vec<DailyRecord> {
    records
        .iter()
        .map(|r| DailyRecord {
            participant_id: r.participant_id.clone(),
            date: r.date,
            responses: r
                .responses
                .iter()
                .filter(|(_, v)| !v.is_empty())
                .map(|(q, v)| (q.clone(), v.iter().sum::<f64>() / v.len() as f64))
                .collect(),
        })
        .collect()
}

/// Mean number of response submissions per recorded day, per participant.
pub fn response_rates(records: &[RawDailyRecord]) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in records {
        let e = acc.entry(&r.participant_id).or_default();
        e.0 += r.submissions();
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(p, (subs, days))| (p.to_string(), subs as f64 / days as f64))
        .collect()
}

/// Completeness thresholds applied by [`filter_complete`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterCriteria {
    pub min_days: usize,
    pub require_watch: bool,
    pub min_watch_days: usize,
}

impl Default for FilterCriteria {
    fn default() -> Self {
        Self {
            min_days: 10,
            require_watch: false,
            min_watch_days: 10,
        }
    }
}

/// Per-participant number of days with actigraphy coverage.
pub type WatchCoverage = BTreeMap<String, usize>;

/// Complete participant-days that survived [`filter_complete`].
#[derive(Debug, Clone, PartialEq)]
pub struct CohortTable {
    pub records: Vec<DailyRecord>,
    pub registry: QuestionRegistry,
    pub participants: BTreeSet<String>,
}

impl CohortTable {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn days_per_participant(&self) -> BTreeMap<&str, usize> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry(r.participant_id.as_str()).or_default() += 1;
        }
        out
    }

    /// Write the aggregated records in the `records.csv` long format.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_daily_records(&self.records, writer)
    }
}

pub fn write_daily_records<W: Write>(records: &[DailyRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RECORDS_HEADER)?;
    for r in records {
        let date = r.date.to_string();
        for (q, v) in &r.responses {
            w.write_record([r.participant_id.as_str(), &date, q, &v.to_string()])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Apply the completeness rules in order:
///
/// 1. drop every day missing any registry question;
/// 2. drop participants with fewer than `min_days` surviving days;
/// 3. when `require_watch`, drop participants with fewer than
///    `min_watch_days` days of actigraphy coverage.
pub fn filter_complete(
    records: &[DailyRecord],
    registry: &QuestionRegistry,
    criteria: &FilterCriteria,
    watch: Option<&WatchCoverage>,
) -> Result<CohortTable> {
    if criteria.min_days == 0 {
        return Err(Error::config("min_days", "must be at least 1"));
    }
    if criteria.require_watch && watch.is_none() {
        return Err(Error::config(
            "require_watch",
            "actigraphy coverage is required but none was supplied",
        ));
    }

    let mut complete: Vec<DailyRecord> = records
        .iter()
        .filter(|r| registry.ids().all(|q| r.responses.contains_key(q)))
        .map(|r| DailyRecord {
            participant_id: r.participant_id.clone(),
            date: r.date,
            responses: registry.ids().map(|q| (q.to_string(), r.responses[q])).collect(),
        })
        .collect();
    complete.sort_by(|a, b| (&a.participant_id, a.date).cmp(&(&b.participant_id, b.date)));
    complete.dedup_by(|a, b| a.participant_id == b.participant_id && a.date == b.date);

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &complete {
        *counts.entry(r.participant_id.as_str()).or_default() += 1;
    }
    let participants: BTreeSet<String> = counts
        .into_iter()
        .filter(|&(_, n)| n >= criteria.min_days)
        .filter(|&(p, _)| {
            !criteria.require_watch
                || watch
                    .and_then(|w| w.get(p))
                    .is_some_and(|&d| d >= criteria.min_watch_days)
        })
        .map(|(p, _)| p.to_string())
        .collect();
    complete.retain(|r| participants.contains(&r.participant_id));

    if complete.is_empty() {
        log::warn!("no participant-days survived the completeness filter");
    }
    Ok(CohortTable {
        records: complete,
        registry: registry.clone(),
        participants,
    })
}

/// Age and binary sex used as covariates for voice residualization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub age: f64,
    pub sex: f64,
}

pub fn parse_demographics<R: Read>(reader: R) -> Result<BTreeMap<String, Demographics>> {
    let mut rdr = csv_reader(reader);
    expect_header(rdr.headers()?, &DEMOGRAPHICS_HEADER)?;
    let mut out = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        let id = non_empty_id(&row[0], line)?;
        let age = parse_f64(&row[1], "age", line)?;
        let sex = parse_f64(&row[2], "sex", line)?;
        if sex != 0.0 && sex != 1.0 {
            return Err(Error::Parse {
                line,
                message: format!("sex must be coded 0 or 1, found `{}`", &row[2]),
            });
        }
        if out.insert(id.clone(), Demographics { age, sex }).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate participant `{id}`"),
            });
        }
    }
    Ok(out)
}

pub fn write_demographics<W: Write>(demographics: &BTreeMap<String, Demographics>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(DEMOGRAPHICS_HEADER)?;
    for (p, d) in demographics {
        w.write_record([p.as_str(), &d.age.to_string(), &d.sex.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
