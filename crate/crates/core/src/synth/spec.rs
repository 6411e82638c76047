use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Category, Polarity, QuestionRegistry, QuestionSpec};

/// Columns of [`CohortSpec::state_feature_means`], all in normalized units.
/// The questionnaire entries apply to every question of that category.
pub const SYNTH_COLUMNS: [&str; 8] = [
    "pain",
    "mood",
    "sleep",
    "alertness",
    "medication",
    "activity_adl",
    "activity_interference",
    "effective_mobility",
];

/// `(question_id, category, scale_min, scale_max, polarity)` of the
/// generated questionnaire.
pub const SYNTH_QUESTIONS: [(&str, Category, f64, f64, Polarity); 12] = [
    ("pain_overall", Category::Pain, 0.0, 10.0, Polarity::HigherIsWorse),
    ("pain_leg", Category::Pain, 0.0, 10.0, Polarity::HigherIsWorse),
    ("pain_back", Category::Pain, 0.0, 10.0, Polarity::HigherIsWorse),
    ("mood", Category::Mood, 0.0, 10.0, Polarity::HigherIsBetter),
    ("sleep_hours", Category::Sleep, 0.0, 12.0, Polarity::HigherIsBetter),
    ("sleep_quality", Category::Sleep, 0.0, 10.0, Polarity::HigherIsBetter),
    ("alertness", Category::Alertness, 0.0, 10.0, Polarity::HigherIsBetter),
    ("med_opioid", Category::Medication, 0.0, 10.0, Polarity::HigherIsWorse),
    ("med_otc", Category::Medication, 0.0, 10.0, Polarity::HigherIsWorse),
    (
        "med_non_opioid",
        Category::Medication,
        0.0,
        10.0,
        Polarity::HigherIsWorse,
    ),
    ("adl", Category::ActivityAdl, 0.0, 10.0, Polarity::HigherIsBetter),
    (
        "pain_interference",
        Category::ActivityInterference,
        0.0,
        10.0,
        Polarity::HigherIsWorse,
    ),
];

pub(crate) fn column_of(category: Category) -> usize {
    match category {
        Category::Pain => 0,
        Category::Mood => 1,
        Category::Sleep => 2,
        Category::Alertness => 3,
        Category::Medication => 4,
        Category::ActivityAdl => 5,
        Category::ActivityInterference => 6,
    }
}

pub(crate) const MOBILITY_COLUMN: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    Gaussian,
    /// Student's t rescaled to unit variance; `df` must exceed 2.
    StudentT {
        df: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseRates {
    /// Share of participants who answer several times a day.
    pub high_responder_fraction: f64,
    pub high_responder_submissions: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSpec {
    pub n_participants: usize,
    pub days_per_participant: usize,
    pub n_states: usize,
    pub start_date: NaiveDate,
    /// `n_states` rows over [`SYNTH_COLUMNS`].
    pub state_feature_means: Vec<Vec<f64>>,
    /// Per-state quality in `[0, 1]`, higher is better. Drives voice and
    /// assessments and defines the ground-truth order.
    pub quality: Vec<f64>,
    /// Daily answer noise in raw question units.
    pub noise_sd: f64,
    pub noise_model: NoiseModel,
    /// SD of a per-participant offset added to mood, sleep and alertness,
    /// in normalized units.
    pub participant_trait_sd: f64,
    pub transition_matrix: Vec<Vec<f64>>,
    pub response_rate_distribution: ResponseRates,
    /// Probability that a single question is skipped on a given day.
    pub missingness_rate: f64,
    pub watch_wear_rate: f64,
    /// Actigraphy readings per worn day, evenly spaced from 08:00 to 20:00.
    pub actigraphy_samples_per_day: u32,
    pub voice_interval_days: u32,
    pub n_voice_features: usize,
    /// Length of the voice mean shift from the worst to the best state.
    pub voice_state_loading: f64,
    pub voice_noise_sd: f64,
    pub voice_age_effect: f64,
    pub voice_sex_effect: f64,
    /// Days between assessment administrations.
    pub assessment_schedule: u32,
    /// Assessment noise as a fraction of each instrument's generated range.
    pub assessment_noise_sd: f64,
    pub event_day: Option<u32>,
    pub event_type: String,
    pub post_event_transition_matrix: Option<Vec<Vec<f64>>>,
    pub seed: u64,
}

/// Sticky chain that moves only to adjacent states. `better` and `worse`
/// are the per-day probabilities of stepping towards state 0 and away
/// from it; the boundary states keep the unused mass.
pub fn adjacent_chain(n: usize, better: f64, worse: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            if i > 0 {
                row[i - 1] = better;
            }
            if i + 1 < n {
                row[i + 1] = worse;
            }
            row[i] = 1.0 - row.iter().sum::<f64>();
            row
        })
        .collect()
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

impl Default for CohortSpec {
    fn default() -> Self {
        // States A/B and D/E share their non-pain questionnaire profile, so
        // questionnaires alone separate three pain levels; mobility and
        // voice tell the pairs apart.
        let means = vec![
            vec![0.20, 0.75, 0.70, 0.70, 0.20, 0.75, 0.20, 0.92],
            vec![0.32, 0.75, 0.70, 0.70, 0.20, 0.75, 0.20, 0.71],
            vec![0.50, 0.50, 0.50, 0.50, 0.45, 0.50, 0.45, 0.50],
            vec![0.68, 0.25, 0.30, 0.30, 0.70, 0.30, 0.70, 0.29],
            vec![0.80, 0.25, 0.30, 0.30, 0.70, 0.30, 0.70, 0.08],
        ];
        Self {
            n_participants: 120,
            days_per_participant: 100,
            n_states: 5,
            start_date: NaiveDate::from_ymd_opt(2021, 1, 4).expect("valid date"),
            state_feature_means: means,
            quality: vec![1.0, 0.75, 0.5, 0.25, 0.0],
            noise_sd: 0.5,
            noise_model: NoiseModel::Gaussian,
            participant_trait_sd: 0.06,
            transition_matrix: adjacent_chain(5, 0.05, 0.05),
            response_rate_distribution: ResponseRates {
                high_responder_fraction: 0.05,
                high_responder_submissions: 3,
            },
            missingness_rate: 0.01,
            watch_wear_rate: 0.9,
            actigraphy_samples_per_day: 36,
            voice_interval_days: 7,
            n_voice_features: 10,
            voice_state_loading: 2.0,
            voice_noise_sd: 0.03,
            voice_age_effect: 0.01,
            voice_sex_effect: 0.3,
            assessment_schedule: 14,
            assessment_noise_sd: 0.05,
            event_day: Some(50),
            event_type: "scs_activation".into(),
            post_event_transition_matrix: Some(adjacent_chain(5, 0.08, 0.02)),
            seed: 0,
        }
    }
}

impl CohortSpec {
    /// `n_states` evenly graded states from best to worst, every column
    /// moving monotonically with quality.
    pub fn graded(n_states: usize) -> Self {
        let best = [0.15, 0.80, 0.75, 0.75, 0.15, 0.80, 0.15, 0.92];
        let worst = [0.85, 0.20, 0.25, 0.25, 0.80, 0.25, 0.80, 0.08];
        let t = |s: usize| {
            if n_states > 1 {
                s as f64 / (n_states - 1) as f64
            } else {
                0.0
            }
        };
        Self {
            n_states,
            state_feature_means: (0..n_states)
                .map(|s| best.iter().zip(&worst).map(|(&a, &b)| lerp(a, b, t(s))).collect())
                .collect(),
            quality: (0..n_states).map(|s| 1.0 - t(s)).collect(),
            transition_matrix: adjacent_chain(n_states, 0.05, 0.05),
            post_event_transition_matrix: Some(adjacent_chain(n_states, 0.08, 0.02)),
            participant_trait_sd: 0.0,
            ..Self::default()
        }
    }

    pub fn registry() -> QuestionRegistry {
        QuestionRegistry::new(
            SYNTH_QUESTIONS
                .iter()
                .map(|&(id, category, scale_min, scale_max, polarity)| QuestionSpec {
                    question_id: id.into(),
                    category,
                    scale_min,
                    scale_max,
                    polarity,
                })
                .collect(),
        )
        .expect("built-in registry is valid")
    }

    /// States sorted from best to worst quality.
    pub fn quality_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n_states).collect();
        order.sort_by(|&a, &b| self.quality[b].total_cmp(&self.quality[a]));
        order
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_states;
        if k == 0 {
            return Err(Error::config("n_states", "must be at least 1"));
        }
        if self.n_participants == 0 || self.days_per_participant == 0 {
            return Err(Error::config("n_participants", "cohort must be non-empty"));
        }
        if self.state_feature_means.len() != k
            || self.state_feature_means.iter().any(|r| r.len() != SYNTH_COLUMNS.len())
        {
            return Err(Error::config(
                "state_feature_means",
                format!("must be {k} rows of {} values", SYNTH_COLUMNS.len()),
            ));
        }
        if self.quality.len() != k || self.quality.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(Error::config("quality", format!("must be {k} values in [0, 1]")));
        }
        let order = self.quality_order();
        if order.windows(2).any(|w| self.quality[w[0]] == self.quality[w[1]]) {
            return Err(Error::config("quality", "must be distinct (strict order)"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::config("noise_sd", "must be finite and non-negative"));
        }
        if let NoiseModel::StudentT { df } = self.noise_model {
            if !(df > 2.0) {
                return Err(Error::config("noise_model", "Student t needs df > 2"));
            }
        }
        if !(self.participant_trait_sd >= 0.0) {
            return Err(Error::config("participant_trait_sd", "must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.missingness_rate) {
            return Err(Error::config("missingness_rate", "must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.watch_wear_rate) {
            return Err(Error::config("watch_wear_rate", "must lie in [0, 1]"));
        }
        let rr = &self.response_rate_distribution;
        if !(0.0..=1.0).contains(&rr.high_responder_fraction) || rr.high_responder_submissions == 0 {
            return Err(Error::config(
                "response_rate_distribution",
                "fraction must lie in [0, 1] and submissions be positive",
            ));
        }
        if self.actigraphy_samples_per_day == 0 || self.actigraphy_samples_per_day > 720 {
            return Err(Error::config("actigraphy_samples_per_day", "must lie in 1..=720"));
        }
        if self.voice_interval_days == 0 || self.n_voice_features == 0 {
            return Err(Error::config(
                "voice_interval_days",
                "voice schedule and width must be positive",
            ));
        }
        if self.assessment_schedule == 0 {
            return Err(Error::config("assessment_schedule", "must be at least 1 day"));
        }
        if !(self.assessment_noise_sd >= 0.0 && self.voice_noise_sd >= 0.0) {
            return Err(Error::config(
                "assessment_noise_sd",
                "noise levels must be non-negative",
            ));
        }
        check_stochastic("transition_matrix", &self.transition_matrix, k)?;
        if let Some(m) = &self.post_event_transition_matrix {
            check_stochastic("post_event_transition_matrix", m, k)?;
        }
        // a mean more than 3 SD outside the scale would be mostly clipped
        for q in SYNTH_QUESTIONS {
            let sd = self.noise_sd / (q.3 - q.2);
            let col = column_of(q.1);
            for (s, row) in self.state_feature_means.iter().enumerate() {
                let m = row[col];
                if m < -3.0 * sd || m > 1.0 + 3.0 * sd || !m.is_finite() {
                    return Err(Error::config(
                        "state_feature_means",
                        format!("state {s} {} mean {m} is outside the scale", SYNTH_COLUMNS[col]),
                    ));
                }
            }
        }
        for (s, row) in self.state_feature_means.iter().enumerate() {
            if !(0.0..=1.0).contains(&row[MOBILITY_COLUMN]) {
                return Err(Error::config(
                    "state_feature_means",
                    format!("state {s} effective_mobility must lie in [0, 1]"),
                ));
            }
        }
        Ok(())
    }
}

fn check_stochastic(field: &str, m: &[Vec<f64>], k: usize) -> Result<()> {
    if m.len() != k || m.iter().any(|r| r.len() != k) {
        return Err(Error::config(field, format!("must be {k} x {k}")));
    }
    for (i, row) in m.iter().enumerate() {
        if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config(field, format!("row {i} is not a probability vector")));
        }
    }
    Ok(())
}

/// Stationary distribution by power iteration from the uniform vector.
pub fn stationary_distribution(m: &[Vec<f64>]) -> Vec<f64> {
    let k = m.len();
    let mut pi = vec![1.0 / k as f64; k];
    for _ in 0..100_000 {
        let mut next = vec![0.0; k];
        for (i, row) in m.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                next[j] += pi[i] * p;
            }
        }
        let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if diff < 1e-15 {
            break;
        }
    }
    pi
}
