use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::kmeans::{sq_dist, KMeansFit};
use crate::error::{Error, Result};
use crate::features::{FeatureTable, NormalizationParams};

/// Per-criterion choice of k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Votes {
    pub elbow: usize,
    pub silhouette: usize,
    pub agglomerative: usize,
    pub consensus: usize,
}

impl Votes {
    pub fn as_array(&self) -> [usize; 4] {
        [self.elbow, self.silhouette, self.agglomerative, self.consensus]
    }
}

/// Diagnostics behind the choice of k. Every curve is indexed like `k_range`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelectionReport {
    pub k_range: Vec<usize>,
    pub wcss_curve: Vec<f64>,
    pub silhouette_curve: Vec<f64>,
    pub agglomerative_ari_curve: Vec<f64>,
    pub consensus_pac_curve: Vec<f64>,
    pub chosen_k: usize,
    pub votes: Votes,
}

/// A fitted set of states: centroids in normalized feature space plus
/// everything needed to reproduce and interpret them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub feature_names: Vec<String>,
    /// `k` rows of `feature_names.len()` coordinates.
    pub centroids: Vec<Vec<f64>>,
    pub normalization: Option<NormalizationParams>,
    pub seed: u64,
    pub wcss: f64,
    pub selection: Option<KSelectionReport>,
    /// Ordinal label of each centroid (`"A"` is the best state).
    pub ranking: Option<Vec<String>>,
}

impl ClusterModel {
    pub fn from_fit(fit: &KMeansFit, feature_names: Vec<String>, seed: u64) -> Self {
        Self {
            k: fit.k(),
            feature_names,
            centroids: fit.centroids.rows().into_iter().map(|r| r.to_vec()).collect(),
            normalization: None,
            seed,
            wcss: fit.wcss,
            selection: None,
            ranking: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn centroid_matrix(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.k, self.dim()), |(i, j)| self.centroids[i][j])
    }

    pub fn check(&self) -> Result<()> {
        if self.centroids.len() != self.k {
            return Err(Error::Invariant(format!(
                "model has k = {} but {} centroids",
                self.k,
                self.centroids.len()
            )));
        }
        if let Some(c) = self.centroids.iter().find(|c| c.len() != self.dim()) {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: c.len(),
            });
        }
        if let Some(r) = &self.ranking {
            if r.len() != self.k {
                return Err(Error::Invariant("ranking length differs from k".into()));
            }
        }
        Ok(())
    }

    /// Euclidean distance from `values` to every centroid, in centroid order.
    pub fn distances(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: values.len(),
            });
        }
        Ok(self.centroids.iter().map(|c| sq_dist(values, c).sqrt()).collect())
    }

    /// Index of the nearest centroid; ties go to the lowest index.
    pub fn nearest(&self, values: &[f64]) -> Result<usize> {
        let d = self.distances(values)?;
        Ok(argmin(&d))
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        x.rows().into_iter().map(|r| self.nearest(&r.to_vec())).collect()
    }

    /// Require the model's feature columns to match the table's.
    pub fn check_features(&self, table: &FeatureTable) -> Result<()> {
        if self.feature_names != table.names {
            return Err(Error::Schema(format!(
                "model features [{}] do not match table features [{}]",
                self.feature_names.join(","),
                table.names.join(",")
            )));
        }
        Ok(())
    }

    /// Label of centroid `index`: its ordinal letter when ranked, otherwise
    /// the 1-based centroid number.
    pub fn label(&self, index: usize) -> String {
        match &self.ranking {
            Some(r) => r[index].clone(),
            None => (index + 1).to_string(),
        }
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }
}

pub(crate) fn argmin(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |best, (i, &v)| if v < best.1 { (i, v) } else { best },
        )
        .0
}
