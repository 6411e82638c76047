use serde::{Deserialize, Serialize};

use super::kmeans::sq_dist;
use super::ClusterModel;
use crate::error::{Error, Result};

/// Minimum-cost perfect matching on a square cost matrix (Kuhn-Munkres with
/// row/column potentials, `O(n^3)`). Returns `assignment[row] = column` and
/// the total cost.
pub fn hungarian(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    assert!(cost.iter().all(|r| r.len() == n), "cost matrix must be square");
    // 1-based potentials; column 0 is a sentinel
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        matched_row[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = matched_row[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=n {
                if !used[col] {
                    let cur = cost[r0 - 1][col - 1] - u[r0] - v[col];
                    if cur < minv[col] {
                        minv[col] = cur;
                        way[col] = col0;
                    }
                    if minv[col] < delta {
                        delta = minv[col];
                        col1 = col;
                    }
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[matched_row[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if matched_row[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            matched_row[col0] = matched_row[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for col in 1..=n {
        assignment[matched_row[col] - 1] = col - 1;
    }
    let total = assignment.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
    (assignment, total)
}

/// Bijective centroid matching between two models over the same features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// `mapping[i]` is the centroid of the second model matched to centroid
    /// `i` of the first.
    pub mapping: Vec<usize>,
    pub total_distance: f64,
    /// Cosine similarity of each matched pair, indexed like `mapping`.
    pub cosine: Vec<f64>,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        if na == nb {
            1.0
        } else {
            0.0
        }
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

pub(crate) fn align_centroids(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Alignment> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            found: b.len(),
        });
    }
    let d = a.first().map_or(0, Vec::len);
    if let Some(bad) = a.iter().chain(b).find(|c| c.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            found: bad.len(),
        });
    }
    let cost: Vec<Vec<f64>> = a
        .iter()
        .map(|ca| b.iter().map(|cb| sq_dist(ca, cb).sqrt()).collect())
        .collect();
    let (mapping, total_distance) = hungarian(&cost);
    let cosine = mapping.iter().enumerate().map(|(i, &j)| cosine(&a[i], &b[j])).collect();
    Ok(Alignment {
        mapping,
        total_distance,
        cosine,
    })
}

/// Match the centroids of `b` to those of `a`, minimising the summed
/// Euclidean distance. Both models must share `k` and the feature space.
pub fn align_clusters(a: &ClusterModel, b: &ClusterModel) -> Result<Alignment> {
    if a.feature_names != b.feature_names {
        return Err(Error::Schema(
            "cannot align models fitted on different feature spaces".into(),
        ));
    }
    align_centroids(&a.centroids, &b.centroids)
}
