//! Feature engineering: question normalization, questionnaire composites,
//! effective mobility from actigraphy and voice residualization + PCA.

mod assemble;
mod compose;
mod mobility;
mod normalize;
mod table;
mod voice;

pub use assemble::{assemble_features, JoinSummary, Modality};
pub use compose::{compose, COMPOSITE_NAMES, DEFAULT_PENALTY};
pub use mobility::{
    derive_zones, parse_actigraphy, watch_coverage, write_mobility, ActigraphySample, MobilityProfile, ZoneConfig,
    ACTIGRAPHY_HEADER, ZONE_COUNT,
};
pub use normalize::{fit_normalization, Affine, NormalizationMethod, NormalizationParams};
pub use table::{FeatureTable, FeatureVector};
pub use voice::{
    pca_reduce, residualize, Covariate, ResidualCoefficients, Residualized, VoiceComponents, VoiceScores, VoiceTable,
};

pub const EFFECTIVE_MOBILITY: &str = "effective_mobility";

pub fn voice_feature_name(component: usize) -> String {
    format!("voice_pc_{}", component + 1)
}
