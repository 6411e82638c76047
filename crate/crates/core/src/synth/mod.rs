//! Synthetic cohorts with known latent states.
//!
//! Each participant follows a Markov chain over states. Questionnaire
//! answers, actigraphy, voice and clinical assessments are all drawn from
//! the current state, so the generator's ground truth can be compared with
//! what the pipeline recovers.

mod assessments;
mod cohort;
mod spec;

pub use assessments::{generate_assessments, InstrumentModel};
pub use cohort::{generate_cohort, GroundTruth, ParticipantTruth, ResponseRow, SyntheticCohort};
pub use spec::{stationary_distribution, CohortSpec, NoiseModel, ResponseRates, SYNTH_COLUMNS, SYNTH_QUESTIONS};
