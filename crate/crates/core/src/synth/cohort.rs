use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveTime, TimeDelta};
use ndarray::Array2;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{column_of, stationary_distribution, CohortSpec, NoiseModel, MOBILITY_COLUMN, SYNTH_QUESTIONS};
use crate::error::{Error, Result};
use crate::features::{ActigraphySample, FeatureTable, VoiceTable, ZoneConfig, ZONE_COUNT};
use crate::ingest::{write_demographics, Category, Demographics, QuestionRegistry, RawDailyRecord, RECORDS_HEADER};
use crate::io::{create, write_json};
use crate::timecourse::{write_events, EventRecord};
use crate::validation::write_assessments;

/// Random stream per participant and data source, so that changing one
/// source's parameters leaves the others unchanged.
#[derive(Clone, Copy)]
pub(crate) enum Stream {
    Profile = 0,
    States = 1,
    Responses = 2,
    Actigraphy = 3,
    Voice = 4,
    Assessments = 5,
}

pub(crate) fn stream_rng(seed: u64, participant: usize, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(participant as u64 * 8 + stream as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantTruth {
    pub participant_id: String,
    pub start_date: NaiveDate,
    pub event_date: Option<NaiveDate>,
    pub age: f64,
    pub sex: f64,
    pub trait_offset: f64,
    pub submissions_per_day: u32,
    /// Latent state of each day from `start_date`.
    pub states: Vec<usize>,
}

impl ParticipantTruth {
    pub fn state_on(&self, date: NaiveDate) -> Option<usize> {
        let d = (date - self.start_date).num_days();
        usize::try_from(d).ok().and_then(|d| self.states.get(d).copied())
    }

    pub fn date_of(&self, day: usize) -> NaiveDate {
        self.start_date + TimeDelta::days(day as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub participants: Vec<ParticipantTruth>,
    pub quality: Vec<f64>,
    /// States from best to worst.
    pub quality_order: Vec<usize>,
    pub spec: CohortSpec,
}

impl GroundTruth {
    pub fn participant(&self, participant_id: &str) -> Option<&ParticipantTruth> {
        self.participants
            .binary_search_by(|p| p.participant_id.as_str().cmp(participant_id))
            .ok()
            .map(|i| &self.participants[i])
    }

    pub fn state_on(&self, participant_id: &str, date: NaiveDate) -> Option<usize> {
        self.participant(participant_id)?.state_on(date)
    }

    /// Latent state of every row of `table`.
    pub fn labels_for(&self, table: &FeatureTable) -> Result<Vec<usize>> {
        table
            .vectors
            .iter()
            .map(|v| {
                self.state_on(&v.participant_id, v.date)
                    .ok_or_else(|| Error::Invariant(format!("no ground truth for {} on {}", v.participant_id, v.date)))
            })
            .collect()
    }

    /// Share of days spent in each state over all participants.
    pub fn occupancy(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.quality.len()];
        for p in &self.participants {
            for &s in &p.states {
                counts[s] += 1;
            }
        }
        let total: usize = counts.iter().sum();
        counts.iter().map(|&c| c as f64 / total.max(1) as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseRow {
    pub participant_id: String,
    pub date: NaiveDate,
    pub question_id: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub registry: QuestionRegistry,
    pub responses: Vec<ResponseRow>,
    pub actigraphy: Vec<ActigraphySample>,
    pub voice: VoiceTable,
    pub demographics: BTreeMap<String, Demographics>,
    pub events: Vec<EventRecord>,
    pub truth: GroundTruth,
}

struct ParticipantData {
    truth: ParticipantTruth,
    responses: Vec<ResponseRow>,
    actigraphy: Vec<ActigraphySample>,
    voice: Vec<(NaiveDate, Vec<f64>)>,
}

fn noise(rng: &mut ChaCha8Rng, model: NoiseModel) -> f64 {
    match model {
        NoiseModel::Gaussian => rng.sample(StandardNormal),
        NoiseModel::StudentT { df } => {
            let t: f64 = StudentT::new(df).expect("df validated").sample(rng);
            t * ((df - 2.0) / df).sqrt()
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

/// Unit direction, mean offsets and covariate effects of the voice columns.
struct VoiceDesign {
    base: Vec<f64>,
    direction: Vec<f64>,
    age: Vec<f64>,
    sex: Vec<f64>,
}

impl VoiceDesign {
    fn new(spec: &CohortSpec) -> Self {
        let n = spec.n_voice_features;
        let raw: Vec<f64> = (0..n)
            .map(|j| (1 + j % 3) as f64 * if j % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        Self {
            base: (0..n).map(|j| 0.5 + 0.1 * j as f64).collect(),
            direction: raw.iter().map(|x| x / norm).collect(),
            age: (0..n).map(|j| spec.voice_age_effect * (1 + j % 2) as f64).collect(),
            sex: (0..n)
                .map(|j| spec.voice_sex_effect * if (j / 2) % 2 == 0 { 1.0 } else { -1.0 })
                .collect(),
        }
    }

    fn names(n: usize) -> Vec<String> {
        (1..=n).map(|j| format!("voice_f{j:02}")).collect()
    }
}

pub(crate) fn participant_id(spec: &CohortSpec, p: usize) -> String {
    let width = spec.n_participants.to_string().len().max(3);
    format!("P{:0width$}", p + 1)
}

fn simulate_participant(spec: &CohortSpec, p: usize, voice: &VoiceDesign) -> ParticipantData {
    let pid = participant_id(spec, p);
    let start_date = spec.start_date + TimeDelta::days((p % 28) as i64);

    let mut rng = stream_rng(spec.seed, p, Stream::Profile);
    let age = f64::from(rng.random_range(30..80u32));
    let sex = f64::from(u8::from(rng.random_bool(0.5)));
    let trait_offset = spec.participant_trait_sd * rng.sample::<f64, _>(StandardNormal);
    let rates = spec.response_rate_distribution;
    let submissions_per_day = if rng.random::<f64>() < rates.high_responder_fraction {
        rates.high_responder_submissions
    } else {
        1
    };

    let mut rng = stream_rng(spec.seed, p, Stream::States);
    let mut states = Vec::with_capacity(spec.days_per_participant);
    let mut s = draw(&mut rng, &stationary_distribution(&spec.transition_matrix));
    for day in 0..spec.days_per_participant {
        if day > 0 {
            let post = spec.event_day.is_some_and(|e| day > e as usize);
            let matrix = match (&spec.post_event_transition_matrix, post) {
                (Some(m), true) => m,
                _ => &spec.transition_matrix,
            };
            s = draw(&mut rng, &matrix[s]);
        }
        states.push(s);
    }

    let truth = ParticipantTruth {
        participant_id: pid.clone(),
        start_date,
        event_date: spec.event_day.map(|e| start_date + TimeDelta::days(e.into())),
        age,
        sex,
        trait_offset,
        submissions_per_day,
        states,
    };

    let mut rng = stream_rng(spec.seed, p, Stream::Responses);
    let mut responses = Vec::new();
    for (day, &s) in truth.states.iter().enumerate() {
        let date = truth.date_of(day);
        let means = &spec.state_feature_means[s];
        for &(question_id, category, lo, hi, _) in &SYNTH_QUESTIONS {
            if rng.random::<f64>() < spec.missingness_rate {
                continue;
            }
            let shifted = matches!(category, Category::Mood | Category::Sleep | Category::Alertness);
            let m = means[column_of(category)] + if shifted { trait_offset } else { 0.0 };
            for _ in 0..submissions_per_day {
                let raw = lo + m * (hi - lo) + spec.noise_sd * noise(&mut rng, spec.noise_model);
                responses.push(ResponseRow {
                    participant_id: pid.clone(),
                    date,
                    question_id,
                    value: raw.clamp(lo, hi),
                });
            }
        }
    }

    let mut rng = stream_rng(spec.seed, p, Stream::Actigraphy);
    let thresholds = ZoneConfig::default().thresholds;
    let mut bounds = vec![0.2];
    bounds.extend(thresholds);
    bounds.push(8.0);
    let step = 720 / spec.actigraphy_samples_per_day;
    let morning = NaiveTime::from_hms_opt(8, 0, 0).expect("valid time");
    let mut actigraphy = Vec::new();
    for (day, &s) in truth.states.iter().enumerate() {
        if rng.random::<f64>() >= spec.watch_wear_rate {
            continue;
        }
        let target = spec.state_feature_means[s][MOBILITY_COLUMN] * (ZONE_COUNT - 1) as f64;
        let lower = (target.floor() as usize).min(ZONE_COUNT - 1);
        let p_up = target - lower as f64;
        let at = truth.date_of(day).and_time(morning);
        for i in 0..spec.actigraphy_samples_per_day {
            let zone = (lower + usize::from(rng.random::<f64>() < p_up)).min(ZONE_COUNT - 1);
            // stay clear of the boundaries so rounding cannot change zone
            let (a, b) = (bounds[zone] + 0.01, bounds[zone + 1] - 0.01);
            let rate = (rng.random_range(a..b) * 1000.0).round() / 1000.0;
            actigraphy.push(ActigraphySample {
                participant_id: pid.clone(),
                timestamp: at + TimeDelta::minutes(i64::from(i * step)),
                activity_rate: rate,
            });
        }
    }

    let mut rng = stream_rng(spec.seed, p, Stream::Voice);
    let offset = rng.random_range(0..spec.voice_interval_days) as usize;
    let jitter = Normal::new(0.0, spec.voice_noise_sd).expect("finite sd");
    let mut voice_rows = Vec::new();
    for (day, &s) in truth.states.iter().enumerate() {
        if !(day + offset).is_multiple_of(spec.voice_interval_days as usize) {
            continue;
        }
        let shift = spec.voice_state_loading * spec.quality[s];
        let row = (0..spec.n_voice_features)
            .map(|j| {
                voice.base[j]
                    + voice.direction[j] * shift
                    + voice.age[j] * (age - 55.0)
                    + voice.sex[j] * sex
                    + jitter.sample(&mut rng)
            })
            .collect();
        voice_rows.push((truth.date_of(day), row));
    }

    ParticipantData {
        truth,
        responses,
        actigraphy,
        voice: voice_rows,
    }
}

/// Simulate a cohort. Output depends only on the spec, seed included.
pub fn generate_cohort(spec: &CohortSpec) -> Result<SyntheticCohort> {
    spec.validate()?;
    let voice = VoiceDesign::new(spec);
    let data: Vec<ParticipantData> = (0..spec.n_participants)
        .into_par_iter()
        .map(|p| simulate_participant(spec, p, &voice))
        .collect();

    let mut responses = Vec::new();
    let mut actigraphy = Vec::new();
    let mut voice_keys = Vec::new();
    let mut voice_values = Vec::new();
    let mut demographics = BTreeMap::new();
    let mut events = Vec::new();
    let mut participants = Vec::new();
    for d in data {
        responses.extend(d.responses);
        actigraphy.extend(d.actigraphy);
        for (date, row) in d.voice {
            voice_keys.push((d.truth.participant_id.clone(), date));
            voice_values.extend(row);
        }
        demographics.insert(
            d.truth.participant_id.clone(),
            Demographics {
                age: d.truth.age,
                sex: d.truth.sex,
            },
        );
        if let Some(date) = d.truth.event_date {
            events.push(EventRecord {
                participant_id: d.truth.participant_id.clone(),
                date,
                event_type: spec.event_type.clone(),
            });
        }
        participants.push(d.truth);
    }
    let values = Array2::from_shape_vec((voice_keys.len(), spec.n_voice_features), voice_values)
        .map_err(|e| Error::Invariant(e.to_string()))?;
    Ok(SyntheticCohort {
        registry: CohortSpec::registry(),
        responses,
        actigraphy,
        voice: VoiceTable {
            feature_names: VoiceDesign::names(spec.n_voice_features),
            keys: voice_keys,
            values,
        },
        demographics,
        events,
        truth: GroundTruth {
            participants,
            quality: spec.quality.clone(),
            quality_order: spec.quality_order(),
            spec: spec.clone(),
        },
    })
}

impl SyntheticCohort {
    /// Responses grouped per participant-day, as the ingest parser would
    /// produce them from `records.csv`.
    pub fn raw_records(&self) -> Vec<RawDailyRecord> {
        let mut days: BTreeMap<(&str, NaiveDate), BTreeMap<String, Vec<f64>>> = BTreeMap::new();
        for r in &self.responses {
            days.entry((&r.participant_id, r.date))
                .or_default()
                .entry(r.question_id.to_string())
                .or_default()
                .push(r.value);
        }
        days.into_iter()
            .map(|((p, date), mut responses)| {
                for v in responses.values_mut() {
                    v.sort_by(f64::total_cmp);
                }
                RawDailyRecord {
                    participant_id: p.to_string(),
                    date,
                    responses,
                }
            })
            .collect()
    }

    pub fn write_responses<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(RECORDS_HEADER)?;
        for r in &self.responses {
            w.write_record([
                r.participant_id.as_str(),
                &r.date.to_string(),
                r.question_id,
                &r.value.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn write_actigraphy<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(crate::features::ACTIGRAPHY_HEADER)?;
        for s in &self.actigraphy {
            w.write_record([
                s.participant_id.as_str(),
                &s.timestamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
                &s.activity_rate.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Write every input file plus `ground_truth.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut files = Vec::new();
        let mut out = |name: &str, f: &dyn Fn(&mut dyn Write) -> Result<()>| -> Result<()> {
            let path = dir.join(name);
            let mut w = create(&path)?;
            f(&mut w)?;
            w.flush().map_err(|e| Error::io(&path, e))?;
            files.push(path);
            Ok(())
        };
        out("questions.csv", &|w| self.registry.write_csv(w))?;
        out("records.csv", &|w| self.write_responses(w))?;
        out("actigraphy.csv", &|w| self.write_actigraphy(w))?;
        out("voice.csv", &|w| self.voice.write_csv(w))?;
        out("demographics.csv", &|w| write_demographics(&self.demographics, w))?;
        out("events.csv", &|w| write_events(&self.events, w))?;
        out("assessments.csv", &|w| {
            write_assessments(&super::generate_assessments(&self.truth), w)
        })?;
        let truth = dir.join("ground_truth.json");
        write_json(&truth, &self.truth)?;
        files.push(truth);
        Ok(files)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{derive_zones, fit_normalization, NormalizationMethod};
    use crate::ingest::{aggregate_daily, filter_complete, FilterCriteria};

    fn small(n_states: usize) -> CohortSpec {
        CohortSpec {
            n_participants: 6,
            days_per_participant: 30,
            ..CohortSpec::graded(n_states)
        }
    }

    #[test]
    fn noiseless_days_sit_on_state_means() {
        let spec = CohortSpec {
            noise_sd: 0.0,
            participant_trait_sd: 0.0,
            missingness_rate: 0.0,
            n_participants: 4,
            days_per_participant: 20,
            ..CohortSpec::default()
        };
        let cohort = generate_cohort(&spec).unwrap();
        let registry = &cohort.registry;
        for r in &cohort.responses {
            let s = cohort.truth.state_on(&r.participant_id, r.date).unwrap();
            let q = registry.get(r.question_id).unwrap();
            let expected =
                q.scale_min + spec.state_feature_means[s][column_of(q.category)] * (q.scale_max - q.scale_min);
            assert!((r.value - expected).abs() < 1e-12, "{r:?}");
        }
        let records = aggregate_daily(&cohort.raw_records());
        let table = filter_complete(&records, registry, &FilterCriteria::default(), None).unwrap();
        let params = fit_normalization(&table, NormalizationMethod::ScaleBoundsMinmax).unwrap();
        let normalized = params.apply(&table.records[0]).unwrap();
        let s = cohort
            .truth
            .state_on(&normalized.participant_id, normalized.date)
            .unwrap();
        assert!((normalized.responses["pain_leg"] - spec.state_feature_means[s][0]).abs() < 1e-12);
    }

    #[test]
    fn single_state_cohort() {
        let cohort = generate_cohort(&small(1)).unwrap();
        assert!(cohort
            .truth
            .participants
            .iter()
            .all(|p| p.states.iter().all(|&s| s == 0)));
    }

    #[test]
    fn same_seed_same_cohort() {
        let spec = small(3);
        let a = generate_cohort(&spec).unwrap();
        let b = generate_cohort(&spec).unwrap();
        assert_eq!(a.responses, b.responses);
        assert_eq!(a.actigraphy, b.actigraphy);
        assert_eq!(a.voice, b.voice);
        assert_eq!(a.truth, b.truth);
        let c = generate_cohort(&CohortSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a.responses, c.responses);
    }

    #[test]
    fn values_stay_in_bounds_with_heavy_tails() {
        let spec = CohortSpec {
            noise_sd: 3.0,
            noise_model: NoiseModel::StudentT { df: 3.0 },
            ..small(5)
        };
        let cohort = generate_cohort(&spec).unwrap();
        for r in &cohort.responses {
            let q = cohort.registry.get(r.question_id).unwrap();
            assert!((q.scale_min..=q.scale_max).contains(&r.value));
        }
    }

    #[test]
    fn mobility_tracks_state() {
        let spec = CohortSpec {
            watch_wear_rate: 1.0,
            ..small(5)
        };
        let cohort = generate_cohort(&spec).unwrap();
        let profiles = derive_zones(&cohort.actigraphy, &ZoneConfig::default()).unwrap();
        assert_eq!(profiles.len(), 6 * 30);
        for p in &profiles {
            let s = cohort.truth.state_on(&p.participant_id, p.date).unwrap();
            let target = spec.state_feature_means[s][MOBILITY_COLUMN];
            assert!(
                (p.effective_mobility - target).abs() < 0.15,
                "{} vs {target}",
                p.effective_mobility
            );
        }
    }

    #[test]
    fn high_responders_submit_several_times() {
        let spec = CohortSpec {
            response_rate_distribution: super::super::ResponseRates {
                high_responder_fraction: 1.0,
                high_responder_submissions: 3,
            },
            missingness_rate: 0.0,
            ..small(2)
        };
        let cohort = generate_cohort(&spec).unwrap();
        assert!(cohort.raw_records().iter().all(|r| r.submissions() == 3));
    }

    #[test]
    fn voice_schedule_and_shape() {
        let cohort = generate_cohort(&small(3)).unwrap();
        assert_eq!(cohort.voice.values.ncols(), 10);
        let per: BTreeMap<&str, usize> = cohort.voice.keys.iter().fold(BTreeMap::new(), |mut m, (p, _)| {
            *m.entry(p.as_str()).or_default() += 1;
            m
        });
        assert!(per.values().all(|&n| (4..=5).contains(&n)));
    }

    #[test]
    fn occupancy_approaches_stationary_distribution() {
        let spec = CohortSpec {
            n_participants: 1,
            days_per_participant: 10_000,
            event_day: None,
            transition_matrix: super::super::spec::adjacent_chain(4, 0.2, 0.1),
            ..CohortSpec::graded(4)
        };
        let cohort = generate_cohort(&spec).unwrap();
        let pi = stationary_distribution(&spec.transition_matrix);
        for (o, p) in cohort.truth.occupancy().iter().zip(&pi) {
            assert!((o - p).abs() < 0.05, "{o} vs {p}");
        }
    }

    #[test]
    fn files_written() {
        let dir = std::env::temp_dir().join(format!("pstates-synth-{}", std::process::id()));
        let cohort = generate_cohort(&small(2)).unwrap();
        let files = cohort.write_to(&dir).unwrap();
        assert_eq!(files.len(), 8);
        let text = std::fs::read_to_string(dir.join("records.csv")).unwrap();
        let parsed =
            crate::ingest::parse_daily_records(text.as_bytes(), &cohort.registry, &Default::default()).unwrap();
        assert_eq!(parsed, cohort.raw_records());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
