use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::cohort::{stream_rng, GroundTruth, Stream};
use crate::validation::{AssessmentRecord, Instrument};

/// Linear map from quality to an instrument's score, clipped to its scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstrumentModel {
    pub instrument: Instrument,
    pub at_best: f64,
    pub at_worst: f64,
    pub scale_min: f64,
    pub scale_max: f64,
}

impl InstrumentModel {
    pub const DEFAULTS: [InstrumentModel; 4] = [
        InstrumentModel {
            instrument: Instrument::Odi,
            at_best: 10.0,
            at_worst: 70.0,
            scale_min: 0.0,
            scale_max: 100.0,
        },
        InstrumentModel {
            instrument: Instrument::Eq5dPain,
            at_best: 1.2,
            at_worst: 4.6,
            scale_min: 1.0,
            scale_max: 5.0,
        },
        InstrumentModel {
            instrument: Instrument::Eq5dActivities,
            at_best: 1.1,
            at_worst: 4.4,
            scale_min: 1.0,
            scale_max: 5.0,
        },
        InstrumentModel {
            instrument: Instrument::Eq5dVasHealth,
            at_best: 90.0,
            at_worst: 25.0,
            scale_min: 0.0,
            scale_max: 100.0,
        },
    ];

    pub fn score(&self, quality: f64, z: f64, noise_sd: f64) -> f64 {
        let span = self.at_best - self.at_worst;
        (self.at_worst + span * quality + z * noise_sd * span.abs()).clamp(self.scale_min, self.scale_max)
    }
}

/// Days either side of an administration whose quality is averaged.
const LOCAL_HALF_WIDTH: usize = 3;

/// Administer every instrument on each scheduled day. Scores follow the
/// mean quality of the surrounding week plus noise.
pub fn generate_assessments(truth: &GroundTruth) -> Vec<AssessmentRecord> {
    let spec = &truth.spec;
    let mut out = Vec::new();
    for (p, pt) in truth.participants.iter().enumerate() {
        let mut rng = stream_rng(spec.seed, p, Stream::Assessments);
        let n = pt.states.len();
        for day in (0..n).step_by(spec.assessment_schedule as usize) {
            let lo = day.saturating_sub(LOCAL_HALF_WIDTH);
            let hi = (day + LOCAL_HALF_WIDTH).min(n - 1);
            let q = pt.states[lo..=hi].iter().map(|&s| truth.quality[s]).sum::<f64>() / (hi - lo + 1) as f64;
            for model in InstrumentModel::DEFAULTS {
                let z: f64 = rng.sample(StandardNormal);
                out.push(AssessmentRecord {
                    participant_id: pt.participant_id.clone(),
                    date: pt.date_of(day),
                    instrument: model.instrument,
                    score: model.score(q, z, spec.assessment_noise_sd),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_cohort, CohortSpec};
    use crate::validation::Orientation;

    fn locked(state: usize) -> Vec<AssessmentRecord> {
        let mut spec = CohortSpec {
            n_participants: 1,
            days_per_participant: 30,
            assessment_noise_sd: 0.0,
            event_day: None,
            ..CohortSpec::default()
        };
        spec.transition_matrix = (0..5)
            .map(|i| (0..5).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let mut cohort = generate_cohort(&spec).unwrap();
        cohort.truth.participants[0].states = vec![state; 30];
        generate_assessments(&cohort.truth)
    }

    fn scores(recs: &[AssessmentRecord], i: Instrument) -> Vec<f64> {
        recs.iter().filter(|r| r.instrument == i).map(|r| r.score).collect()
    }

    #[test]
    fn best_state_hits_the_favourable_endpoints() {
        let best = locked(0);
        assert!(scores(&best, Instrument::Odi).iter().all(|&s| s == 10.0));
        assert!(scores(&best, Instrument::Eq5dVasHealth).iter().all(|&s| s == 90.0));
        assert_eq!(best.len(), 3 * 4);
    }

    #[test]
    fn orientation_separates_best_and_worst() {
        let (best, worst) = (locked(0), locked(4));
        for i in Instrument::ALL {
            let (b, w) = (scores(&best, i)[0], scores(&worst, i)[0]);
            match i.orientation() {
                Orientation::HigherIsWorse => assert!(b < w, "{i}"),
                Orientation::HigherIsBetter => assert!(b > w, "{i}"),
            }
        }
    }

    #[test]
    fn scores_respect_scales() {
        let spec = CohortSpec {
            n_participants: 10,
            days_per_participant: 60,
            assessment_noise_sd: 1.0,
            ..CohortSpec::default()
        };
        let truth = generate_cohort(&spec).unwrap().truth;
        for r in generate_assessments(&truth) {
            let m = InstrumentModel::DEFAULTS
                .iter()
                .find(|m| m.instrument == r.instrument)
                .unwrap();
            assert!((m.scale_min..=m.scale_max).contains(&r.score));
        }
    }
}
