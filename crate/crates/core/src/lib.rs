//! Discovery, validation and ranking of latent patient states from
//! longitudinal questionnaire, actigraphy and voice data.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`ingest`] parses raw response streams, averages same-day responses and
//!   applies the completeness rules.
//! * [`features`] normalizes responses, builds the six questionnaire
//!   composites, derives effective mobility from actigraphy and reduces voice
//!   tables with residualization and PCA.
//! * [`clustering`] fits k-means models and selects k from several criteria.
//! * [`validation`] pairs days with standard assessments, correlates centroid
//!   distances with the scores and ranks the states.
//! * [`timecourse`] labels every day with its state and measures dwell-time
//!   changes around clinical events.
//! * [`synth`] generates cohorts with known latent states for end-to-end checks.
//! * [`pipeline`] chains the stages over files on disk and writes every
//!   intermediate artifact.

pub mod clustering;
pub mod error;
pub mod features;
pub mod ingest;
pub mod io;
pub mod pipeline;
pub mod synth;
pub mod timecourse;
pub mod validation;

pub use clustering::{ClusterModel, KSelectionReport, RobustnessReport};
pub use error::{Error, Result};
pub use features::{FeatureTable, FeatureVector, NormalizationParams};
pub use ingest::{CohortTable, DailyRecord, QuestionRegistry, QuestionSpec};
pub use synth::{CohortSpec, GroundTruth};
pub use timecourse::{DwellContrast, StateTimecourse};
pub use validation::{AssessmentRecord, Instrument, ValidationReport};
