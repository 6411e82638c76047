use ndarray::ArrayView2;
use rayon::prelude::*;

use super::kmeans::{sq_dist, Rows};
use crate::error::{Error, Result};

/// Per-point silhouette values with Euclidean distance. Points alone in
/// their cluster score 0.
pub fn silhouette_samples(x: ArrayView2<f64>, labels: &[usize]) -> Result<Vec<f64>> {
    let rows = Rows::new(x);
    if labels.len() != rows.n {
        return Err(Error::Dimension {
            expected: rows.n,
            found: labels.len(),
        });
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::UndefinedScore(
            "silhouette needs at least two non-empty clusters".into(),
        ));
    }
    Ok((0..rows.n)
        .into_par_iter()
        .map(|i| {
            let own = labels[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            let xi = rows.row(i);
            for j in 0..rows.n {
                if j != i {
                    sums[labels[j]] += sq_dist(xi, rows.row(j)).sqrt();
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 {
                (b - a) / denom
            } else {
                0.0
            }
        })
        .collect())
}

/// Mean silhouette over all points.
pub fn silhouette(x: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
    let s = silhouette_samples(x, labels)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}
