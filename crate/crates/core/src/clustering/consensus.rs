use ndarray::{ArrayView2, Axis};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans, restart_rng, KMeansConfig};
use crate::error::{Error, Result};

/// PAC counts consensus entries strictly inside this interval as ambiguous.
pub const PAC_BOUNDS: (f64, f64) = (0.1, 0.9);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsensusConfig {
    pub resamples: usize,
    /// Share of rows drawn (without replacement) per resample.
    pub fraction: f64,
    pub seed: u64,
    /// k-means restarts inside each resample.
    pub restarts: usize,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        Self {
            resamples: 100,
            fraction: 0.8,
            seed: 0,
            restarts: 3,
        }
    }
}

/// Co-clustering counts over resamples, stored as full `n × n` tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusMatrix {
    n: usize,
    co_clustered: Vec<u32>,
    co_sampled: Vec<u32>,
}

impl ConsensusMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Fraction of co-sampled resamples in which `i` and `j` shared a
    /// cluster; `None` if they were never drawn together.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let s = self.co_sampled[i * self.n + j];
        (s > 0).then(|| f64::from(self.co_clustered[i * self.n + j]) / f64::from(s))
    }

    /// Proportion of ambiguous clustering over the observed upper triangle.
    pub fn pac(&self) -> f64 {
        let (lo, hi) = PAC_BOUNDS;
        let mut seen = 0usize;
        let mut ambiguous = 0usize;
        for i in 0..self.n {
            for j in i + 1..self.n {
                if let Some(v) = self.get(i, j) {
                    seen += 1;
                    if v > lo && v < hi {
                        ambiguous += 1;
                    }
                }
            }
        }
        if seen == 0 {
            0.0
        } else {
            ambiguous as f64 / seen as f64
        }
    }
}

/// Monti-style consensus clustering with a k-means base learner.
pub fn consensus(x: ArrayView2<f64>, k: usize, cfg: &ConsensusConfig) -> Result<(ConsensusMatrix, f64)> {
    if !(cfg.fraction > 0.0 && cfg.fraction <= 1.0) {
        return Err(Error::config("fraction", "must lie in (0, 1]"));
    }
    let n = x.nrows();
    let m = ((cfg.fraction * n as f64).round() as usize).clamp(k.min(n), n);
    let runs: Vec<Option<(Vec<usize>, Vec<usize>)>> = (0..cfg.resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(cfg.seed ^ 0x9e37_79b9_7f4a_7c15, r);
            let mut idx = sample(&mut rng, n, m).into_vec();
            idx.sort_unstable();
            let sub = x.select(Axis(0), &idx);
            let kc = KMeansConfig {
                seed: cfg.seed.wrapping_add(r as u64),
                ..KMeansConfig::new(k, 0).with_restarts(cfg.restarts)
            };
            match kmeans(sub.view(), &kc) {
                Ok(fit) => Some((idx, fit.labels)),
                Err(e) => {
                    log::warn!("consensus resample {r} skipped: {e}");
                    None
                }
            }
        })
        .collect();

    let mut cm = ConsensusMatrix {
        n,
        co_clustered: vec![0; n * n],
        co_sampled: vec![0; n * n],
    };
    for (idx, labels) in runs.into_iter().flatten() {
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                cm.co_sampled[i * n + j] += 1;
                if labels[a] == labels[b] {
                    cm.co_clustered[i * n + j] += 1;
                }
            }
        }
    }
    let pac = cm.pac();
    Ok((cm, pac))
}
