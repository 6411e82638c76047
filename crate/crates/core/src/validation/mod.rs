//! Agreement between state membership and standard clinical assessments.

mod assessment;
mod pairing;
mod report;
mod stats;

pub use assessment::{
    parse_assessments, write_assessments, AssessmentRecord, Instrument, Orientation, ASSESSMENTS_HEADER,
};
pub use pairing::{centroid_distances, pair_assessments, sample_days, PairingOutcome, SampleDay, ValidationPair};
pub use report::{
    ordinal_label, rank_states, ranking_scores, validate_states, CellResult, ValidationConfig, ValidationReport,
};
pub use stats::{correlate, pearson, permutation_test, permutation_test_stream};
