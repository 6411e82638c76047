use ndarray::ArrayView2;

use super::kmeans::{sq_dist, Rows};
use crate::error::{Error, Result};

/// Index into the condensed upper triangle for `i < j`.
#[inline]
fn tri(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Bottom-up Ward clustering on Euclidean distance, cut at `k` clusters.
///
/// Every step merges the pair of clusters with the smallest Ward distance;
/// among equal distances the pair with the lowest `(i, j)` wins, where a
/// cluster's index is its lowest member. Labels are numbered by lowest
/// member.
pub fn agglomerative(x: ArrayView2<f64>, k: usize) -> Result<Vec<usize>> {
    let rows = Rows::new(x);
    let n = rows.n;
    if k == 0 || k > n {
        return Err(Error::config("k", format!("must lie in 1..={n}")));
    }
    let mut d = vec![0.0f64; n * n.saturating_sub(1) / 2];
    for i in 0..n {
        for j in i + 1..n {
            d[tri(n, i, j)] = sq_dist(rows.row(i), rows.row(j));
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut owner: Vec<usize> = (0..n).collect();

    // nearest active partner with a larger index: (distance, index)
    let scan = |d: &[f64], active: &[bool], i: usize| -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in i + 1..n {
            if active[j] {
                let v = d[tri(n, i, j)];
                if v < best.0 {
                    best = (v, j);
                }
            }
        }
        best
    };
    let mut nn: Vec<(f64, usize)> = (0..n).map(|i| scan(&d, &active, i)).collect();

    for _ in 0..n - k {
        let mut i = usize::MAX;
        let mut best = f64::INFINITY;
        for s in 0..n {
            if active[s] && nn[s].1 != usize::MAX && nn[s].0 < best {
                best = nn[s].0;
                i = s;
            }
        }
        let j = nn[i].1;
        let dij = d[tri(n, i, j)];
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        active[j] = false;
        for m in 0..n {
            if !active[m] || m == i {
                continue;
            }
            let nm = size[m] as f64;
            let dim = d[tri(n, i.min(m), i.max(m))];
            let djm = d[tri(n, j.min(m), j.max(m))];
            d[tri(n, i.min(m), i.max(m))] = ((ni + nm) * dim + (nj + nm) * djm - nm * dij) / (ni + nj + nm);
        }
        size[i] += size[j];
        for o in owner.iter_mut() {
            if *o == j {
                *o = i;
            }
        }

        nn[i] = scan(&d, &active, i);
        for m in 0..n {
            if !active[m] || m == i {
                continue;
            }
            if nn[m].1 == j || nn[m].1 == i {
                nn[m] = scan(&d, &active, m);
            } else if m < i {
                let v = d[tri(n, m, i)];
                if v < nn[m].0 || (v == nn[m].0 && i < nn[m].1) {
                    nn[m] = (v, i);
                }
            }
        }
    }

    let mut label_of = vec![usize::MAX; n];
    let mut next = 0;
    Ok(owner
        .iter()
        .map(|&o| {
            if label_of[o] == usize::MAX {
                label_of[o] = next;
                next += 1;
            }
            label_of[o]
        })
        .collect())
}
