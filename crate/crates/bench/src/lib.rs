//! Shared fixtures for the benchmarks.

use ndarray::{s, Array2};
use pstates::features::{FeatureTable, Modality};
use pstates::pipeline::{build_features, FeatureOptions, Inputs};
use pstates::synth::{generate_cohort, CohortSpec};

/// Feature table for a default-shaped synthetic cohort.
pub fn cohort_features(n_participants: usize, days: usize, modality: Modality) -> FeatureTable {
    let spec = CohortSpec {
        n_participants,
        days_per_participant: days,
        ..CohortSpec::default()
    };
    let cohort = generate_cohort(&spec).expect("default spec is valid");
    build_features(
        &Inputs::from_synthetic(&cohort),
        &FeatureOptions::with_modality(modality),
    )
    .expect("synthetic inputs are complete")
    .table
}

/// First `n` rows of the feature matrix.
pub fn head(table: &FeatureTable, n: usize) -> Array2<f64> {
    let x = table.matrix();
    let n = n.min(x.nrows());
    x.slice(s![..n, ..]).to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_expected_shape() {
        let t = cohort_features(4, 30, Modality::Mobility);
        assert_eq!(t.dim(), 7);
        assert_eq!(head(&t, 10).dim(), (10, 7));
    }
}
