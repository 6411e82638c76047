use ndarray::{ArrayView2, Axis};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::agglomerative::agglomerative;
use super::ari::adjusted_rand_index;
use super::consensus::{consensus, ConsensusConfig};
use super::kmeans::{kmeans, restart_rng, KMeansConfig, KMeansFit};
use super::model::{KSelectionReport, Votes};
use super::silhouette::silhouette;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub kmeans: KMeansConfig,
    pub consensus: ConsensusConfig,
    /// Silhouette, Ward and consensus need `O(n^2)` memory; above this many
    /// rows they run on a seeded subsample.
    pub max_pairwise: usize,
}

impl SelectionConfig {
    pub fn new(k_min: usize, k_max: usize, seed: u64) -> Self {
        Self {
            k_min,
            k_max,
            kmeans: KMeansConfig::new(k_min, seed),
            consensus: ConsensusConfig {
                seed,
                ..ConsensusConfig::default()
            },
            max_pairwise: 1000,
        }
    }

    pub fn ks(&self) -> Vec<usize> {
        (self.k_min..=self.k_max).collect()
    }
}

fn argmax_smallest(ks: &[usize], values: &[f64]) -> usize {
    let mut best = (ks[0], f64::NEG_INFINITY);
    for (&k, &v) in ks.iter().zip(values) {
        if v > best.1 {
            best = (k, v);
        }
    }
    best.0
}

/// Majority vote; ties go to the smaller k.
pub fn majority(votes: &[usize]) -> usize {
    let mut best = (usize::MAX, 0usize);
    for &k in votes {
        let count = votes.iter().filter(|&&v| v == k).count();
        if count > best.1 || (count == best.1 && k < best.0) {
            best = (k, count);
        }
    }
    best.0
}

/// Fit k-means for every k in range and vote with four criteria: elbow
/// (largest second difference of WCSS), silhouette (max), agreement with
/// Ward clustering (max ARI) and consensus stability (min PAC).
///
/// Returns the report and the k-means fit for each k.
pub fn select_k(x: ArrayView2<f64>, cfg: &SelectionConfig) -> Result<(KSelectionReport, Vec<KMeansFit>)> {
    if cfg.k_min < 2 || cfg.k_max <= cfg.k_min {
        return Err(Error::config(
            "k_range",
            format!("need 2 <= k_min < k_max, got {}..{}", cfg.k_min, cfg.k_max),
        ));
    }
    if cfg.k_max >= x.nrows() {
        return Err(Error::config(
            "k_range",
            format!("k_max {} must be below the sample count {}", cfg.k_max, x.nrows()),
        ));
    }
    let ks = cfg.ks();
    let fit_k = |k| kmeans(x, &KMeansConfig { k, ..cfg.kmeans });
    let below = fit_k(cfg.k_min - 1)?.wcss;
    let fits: Vec<KMeansFit> = ks.iter().map(|&k| fit_k(k)).collect::<Result<_>>()?;
    let wcss_curve: Vec<f64> = fits.iter().map(|f| f.wcss).collect();

    let n = x.nrows();
    let subset: Vec<usize> = if n > cfg.max_pairwise {
        let mut rng = restart_rng(cfg.kmeans.seed ^ 0x5eed_5e1e_c7ed, 0);
        let mut idx = sample(&mut rng, n, cfg.max_pairwise).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..n).collect()
    };
    let xs = x.select(Axis(0), &subset);

    let mut silhouette_curve = Vec::with_capacity(ks.len());
    let mut agglomerative_ari_curve = Vec::with_capacity(ks.len());
    let mut consensus_pac_curve = Vec::with_capacity(ks.len());
    for (&k, fit) in ks.iter().zip(&fits) {
        let labels: Vec<usize> = subset.iter().map(|&i| fit.labels[i]).collect();
        silhouette_curve.push(silhouette(xs.view(), &labels).unwrap_or(f64::NAN));
        let ward = agglomerative(xs.view(), k)?;
        agglomerative_ari_curve.push(adjusted_rand_index(&labels, &ward));
        consensus_pac_curve.push(consensus(xs.view(), k, &cfg.consensus)?.1);
    }

    let mut with_below = vec![below];
    with_below.extend(&wcss_curve);
    let second_diff: Vec<f64> = (0..ks.len())
        .map(|i| match with_below.get(i + 2) {
            Some(next) => with_below[i] - 2.0 * with_below[i + 1] + next,
            None => f64::NEG_INFINITY,
        })
        .collect();
    let neg_pac: Vec<f64> = consensus_pac_curve.iter().map(|p| -p).collect();
    let votes = Votes {
        elbow: argmax_smallest(&ks, &second_diff),
        silhouette: argmax_smallest(&ks, &silhouette_curve),
        agglomerative: argmax_smallest(&ks, &agglomerative_ari_curve),
        consensus: argmax_smallest(&ks, &neg_pac),
    };
    let report = KSelectionReport {
        chosen_k: majority(&votes.as_array()),
        k_range: ks,
        wcss_curve,
        silhouette_curve,
        agglomerative_ari_curve,
        consensus_pac_curve,
        votes,
    };
    Ok((report, fits))
}
