//! k-means state discovery and the evidence used to choose k.

pub mod agglomerative;
pub mod align;
pub mod ari;
pub mod consensus;
pub mod kmeans;
mod model;
pub mod robustness;
pub mod select;
pub mod silhouette;

pub use agglomerative::agglomerative;
pub use align::{align_clusters, hungarian, Alignment};
pub use ari::adjusted_rand_index;
pub use consensus::{consensus, ConsensusConfig, ConsensusMatrix};
pub use kmeans::{kmeans, lloyd, wcss, wcss_curve, KMeansConfig, KMeansFit};
pub use model::{ClusterModel, KSelectionReport, Votes};
pub use robustness::{robustness_splits, RobustnessInputs, RobustnessReport, Split, TemporalWindow};
pub use select::{select_k, SelectionConfig};
pub use silhouette::{silhouette, silhouette_samples};
