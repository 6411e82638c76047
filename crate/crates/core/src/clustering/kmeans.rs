use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    /// Relative WCSS change below which Lloyd iterations stop.
    pub tol: f64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            restarts: 50,
            max_iter: 300,
            tol: 1e-6,
        }
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Array2<f64>,
    pub labels: Vec<usize>,
    pub wcss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Index of the restart that produced this fit.
    pub restart: usize,
    /// WCSS after every assignment step of the winning restart.
    pub history: Vec<f64>,
}

impl KMeansFit {
    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Contiguous row-major view of a data matrix.
pub(crate) struct Rows<'a> {
    data: std::borrow::Cow<'a, [f64]>,
    pub n: usize,
    pub d: usize,
}

impl<'a> Rows<'a> {
    pub fn new(x: ArrayView2<'a, f64>) -> Self {
        let (n, d) = x.dim();
        let data = match x.to_slice() {
            Some(s) => std::borrow::Cow::Borrowed(s),
            None => std::borrow::Cow::Owned(x.iter().copied().collect()),
        };
        Self { data, n, d }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

pub fn count_distinct_rows(x: ArrayView2<f64>) -> usize {
    let rows = Rows::new(x);
    let mut idx: Vec<usize> = (0..rows.n).collect();
    let cmp = |a: &usize, b: &usize| {
        rows.row(*a)
            .iter()
            .zip(rows.row(*b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    idx.sort_by(cmp);
    idx.dedup_by(|a, b| cmp(a, b).is_eq());
    idx.len()
}

/// Nearest centroid per row (ties to the lowest index) and the total WCSS.
fn assign(rows: &Rows, centroids: &[f64], k: usize, labels: &mut [usize], dist: &mut [f64]) -> f64 {
    let d = rows.d;
    let mut wcss = 0.0;
    for i in 0..rows.n {
        let x = rows.row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..k {
            let dc = sq_dist(x, &centroids[c * d..(c + 1) * d]);
            if dc < best_d {
                best_d = dc;
                best = c;
            }
        }
        labels[i] = best;
        dist[i] = best_d;
        wcss += best_d;
    }
    wcss
}

/// Recompute centroids as cluster means. Empty clusters are reseeded with
/// the point farthest from its new centroid.
fn update(rows: &Rows, labels: &[usize], k: usize, centroids: &mut [f64]) {
    let d = rows.d;
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for i in 0..rows.n {
        let c = labels[i];
        counts[c] += 1;
        for (s, x) in sums[c * d..(c + 1) * d].iter_mut().zip(rows.row(i)) {
            *s += x;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for j in 0..d {
                centroids[c * d + j] = sums[c * d + j] / counts[c] as f64;
            }
        }
    }
    if counts.iter().all(|&c| c > 0) {
        return;
    }
    let mut far: Vec<f64> = (0..rows.n)
        .map(|i| {
            let c = labels[i];
            sq_dist(rows.row(i), &centroids[c * d..(c + 1) * d])
        })
        .collect();
    for c in 0..k {
        if counts[c] == 0 {
            let (i, _) = far.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |best, (i, &v)| if v > best.1 { (i, v) } else { best },
            );
            centroids[c * d..(c + 1) * d].copy_from_slice(rows.row(i));
            far[i] = f64::NEG_INFINITY;
        }
    }
}

/// Lloyd iterations from explicit starting centroids (`k × d`).
pub fn lloyd(x: ArrayView2<f64>, initial: ArrayView2<f64>, max_iter: usize, tol: f64) -> Result<KMeansFit> {
    let rows = Rows::new(x);
    let (k, d) = initial.dim();
    if d != rows.d {
        return Err(Error::Dimension {
            expected: rows.d,
            found: d,
        });
    }
    if k == 0 || rows.n == 0 {
        return Err(Error::InsufficientData(
            "k-means needs k >= 1 and at least one row".into(),
        ));
    }
    Ok(lloyd_rows(
        &rows,
        initial.iter().copied().collect(),
        k,
        max_iter,
        tol,
        0,
    ))
}

fn lloyd_rows(rows: &Rows, mut centroids: Vec<f64>, k: usize, max_iter: usize, tol: f64, restart: usize) -> KMeansFit {
    let mut labels = vec![0; rows.n];
    let mut dist = vec![0.0; rows.n];
    let mut wcss = assign(rows, &centroids, k, &mut labels, &mut dist);
    let mut history = vec![wcss];
    let mut next_labels = labels.clone();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        update(rows, &labels, k, &mut centroids);
        let next = assign(rows, &centroids, k, &mut next_labels, &mut dist);
        history.push(next);
        let changed = next_labels != labels;
        std::mem::swap(&mut labels, &mut next_labels);
        let prev = wcss;
        wcss = next;
        if !changed || (prev - wcss).abs() <= tol * prev {
            converged = true;
            break;
        }
    }
    KMeansFit {
        centroids: Array2::from_shape_vec((k, rows.d), centroids).expect("k × d buffer"),
        labels,
        wcss,
        iterations,
        converged,
        restart,
        history,
    }
}

/// k-means++ seeding.
fn plus_plus(rows: &Rows, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = rows.d;
    let mut centroids = Vec::with_capacity(k * d);
    let first = rng.random_range(0..rows.n);
    centroids.extend_from_slice(rows.row(first));
    let mut closest: Vec<f64> = (0..rows.n).map(|i| sq_dist(rows.row(i), rows.row(first))).collect();
    for _ in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in closest.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave target beyond the last partial sum
            chosen.unwrap_or_else(|| closest.iter().rposition(|&w| w > 0.0).expect("total > 0"))
        } else {
            rng.random_range(0..rows.n)
        };
        let c = rows.row(pick);
        centroids.extend_from_slice(c);
        for (i, m) in closest.iter_mut().enumerate() {
            *m = m.min(sq_dist(rows.row(i), c));
        }
    }
    centroids
}

pub(crate) fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Best-of-`restarts` k-means with k-means++ seeding. Each restart draws
/// from its own RNG stream, so the result does not depend on how restarts
/// are scheduled across threads. Ties in WCSS go to the lowest restart.
pub fn kmeans(x: ArrayView2<f64>, cfg: &KMeansConfig) -> Result<KMeansFit> {
    if cfg.k == 0 {
        return Err(Error::config("k", "must be at least 1"));
    }
    if cfg.restarts == 0 {
        return Err(Error::config("restarts", "must be at least 1"));
    }
    let distinct = count_distinct_rows(x);
    if cfg.k > distinct {
        return Err(Error::InfeasibleK { k: cfg.k, distinct });
    }
    let rows = Rows::new(x);
    let fits: Vec<KMeansFit> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(cfg.seed, r);
            let init = plus_plus(&rows, cfg.k, &mut rng);
            lloyd_rows(&rows, init, cfg.k, cfg.max_iter, cfg.tol, r)
        })
        .collect();
    Ok(fits
        .into_iter()
        .reduce(|best, f| if f.wcss < best.wcss { f } else { best })
        .expect("restarts >= 1"))
}

/// Sum of squared distances from each row to its nearest centroid.
pub fn wcss(x: ArrayView2<f64>, centroids: ArrayView2<f64>) -> f64 {
    let rows = Rows::new(x);
    let c: Vec<f64> = centroids.iter().copied().collect();
    let mut labels = vec![0; rows.n];
    let mut dist = vec![0.0; rows.n];
    assign(&rows, &c, centroids.nrows(), &mut labels, &mut dist)
}

/// Best-restart WCSS for each k.
pub fn wcss_curve(x: ArrayView2<f64>, ks: &[usize], base: &KMeansConfig) -> Result<Vec<f64>> {
    ks.iter()
        .map(|&k| Ok(kmeans(x, &KMeansConfig { k, ..*base })?.wcss))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Axis};
    use proptest::prelude::*;

    fn blobs() -> Array2<f64> {
        array![
            [0.0, 0.0],
            [0.2, 0.0],
            [0.0, 0.2],
            [10.0, 10.0],
            [10.2, 10.0],
            [10.0, 10.2],
        ]
    }

    #[test]
    fn separable_groups_recover_means() {
        let fit = kmeans(blobs().view(), &KMeansConfig::new(2, 1)).unwrap();
        let mut c: Vec<Vec<f64>> = fit.centroids.rows().into_iter().map(|r| r.to_vec()).collect();
        c.sort_by(|a, b| a[0].total_cmp(&b[0]));
        for (got, want) in c[0].iter().zip([0.2 / 3.0, 0.2 / 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in c[1].iter().zip([10.0 + 0.2 / 3.0, 10.0 + 0.2 / 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn k_one_is_global_mean() {
        let x = blobs();
        let fit = kmeans(x.view(), &KMeansConfig::new(1, 3)).unwrap();
        let mean = x.mean_axis(Axis(0)).unwrap();
        assert!((fit.centroids.row(0).to_owned() - &mean)
            .iter()
            .all(|v| v.abs() < 1e-12));
        let var_total: f64 = x.var_axis(Axis(0), 0.0).sum();
        assert!((fit.wcss - var_total * x.nrows() as f64).abs() < 1e-9);
    }

    /// All set partitions of `n` labelled items into exactly `k` blocks.
    fn partitions(n: usize, k: usize) -> Vec<Vec<usize>> {
        fn rec(i: usize, n: usize, k: usize, used: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if i == n {
                if used == k {
                    out.push(cur.clone());
                }
                return;
            }
            for b in 0..=used.min(k - 1) {
                cur.push(b);
                rec(i + 1, n, k, used.max(b + 1), cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(0, n, k, 0, &mut Vec::new(), &mut out);
        out
    }

    fn partition_wcss(x: &Array2<f64>, labels: &[usize], k: usize) -> f64 {
        (0..k)
            .map(|c| {
                let members: Vec<usize> = (0..x.nrows()).filter(|&i| labels[i] == c).collect();
                let sub = x.select(Axis(0), &members);
                let m = sub.mean_axis(Axis(0)).unwrap();
                sub.rows()
                    .into_iter()
                    .map(|r| (&r - &m).mapv(|v| v * v).sum())
                    .sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn four_tight_pairs_match_exhaustive_optimum() {
        let x = array![
            [0.0, 0.0],
            [0.3, 0.0],
            [5.0, 0.0],
            [5.0, 0.4],
            [0.0, 6.0],
            [0.1, 6.0],
            [7.0, 7.0],
            [7.2, 7.0]
        ];
        let brute = partitions(8, 4)
            .iter()
            .map(|p| partition_wcss(&x, p, 4))
            .fold(f64::INFINITY, f64::min);
        // each pair contributes 2 * (gap / 2)^2
        let pairs: f64 = [0.3f64, 0.4, 0.1, 0.2].iter().map(|g| 2.0 * (g / 2.0).powi(2)).sum();
        assert!((brute - pairs).abs() < 1e-12);
        let fit = kmeans(x.view(), &KMeansConfig::new(4, 9)).unwrap();
        assert!((fit.wcss - brute).abs() < 1e-9, "{} vs {brute}", fit.wcss);
    }

    #[test]
    fn infeasible_k() {
        let x = array![[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]];
        assert!(matches!(
            kmeans(x.view(), &KMeansConfig::new(3, 0)),
            Err(Error::InfeasibleK { k: 3, distinct: 2 })
        ));
    }

    #[test]
    fn wcss_curve_edges() {
        let same = Array2::from_elem((5, 2), 1.5);
        assert_eq!(
            wcss_curve(same.view(), &[1], &KMeansConfig::new(1, 0)).unwrap(),
            vec![0.0]
        );
        let x = blobs();
        let curve = wcss_curve(x.view(), &[1, 2, 3, 6], &KMeansConfig::new(1, 0)).unwrap();
        assert_eq!(*curve.last().unwrap(), 0.0);
        assert!(curve.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn empty_cluster_is_reseeded() {
        let x = array![[0.0], [1.0], [10.0], [11.0]];
        // two centroids far from everything: the second starts empty
        let init = array![[5.0], [100.0]];
        let fit = lloyd(x.view(), init.view(), 100, 0.0).unwrap();
        assert!(fit.cluster_sizes().iter().all(|&s| s > 0));
        assert!((fit.wcss - 1.0).abs() < 1e-12, "{}", fit.wcss);
    }

    #[test]
    fn deterministic_for_seed() {
        let x = Array2::from_shape_fn((60, 3), |(i, j)| ((i * 7 + j * 13) % 17) as f64);
        let a = kmeans(x.view(), &KMeansConfig::new(4, 42)).unwrap();
        let b = kmeans(x.view(), &KMeansConfig::new(4, 42)).unwrap();
        assert_eq!(a, b);
    }

    fn points() -> impl Strategy<Value = Array2<f64>> {
        (5usize..40, 1usize..4).prop_flat_map(|(n, d)| {
            proptest::collection::vec(-10.0f64..10.0, n * d)
                .prop_map(move |v| Array2::from_shape_vec((n, d), v).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn lloyd_never_increases_wcss(x in points(), k in 1usize..5, seed in any::<u64>()) {
            let k = k.min(count_distinct_rows(x.view()));
            let fit = kmeans(x.view(), &KMeansConfig::new(k, seed).with_restarts(3)).unwrap();
            for w in fit.history.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{:?}", fit.history);
            }
            // labels are nearest centroids, ties to lowest index
            for (i, row) in x.rows().into_iter().enumerate() {
                let d: Vec<f64> = fit.centroids.rows().into_iter()
                    .map(|c| sq_dist(row.as_slice().unwrap(), c.as_slice().unwrap()))
                    .collect();
                let best = d.iter().enumerate()
                    .fold((0, f64::INFINITY), |b, (j, &v)| if v < b.1 { (j, v) } else { b }).0;
                prop_assert_eq!(fit.labels[i], best);
            }
            let recomputed = wcss(x.view(), fit.centroids.view());
            prop_assert!((recomputed - fit.wcss).abs() <= 1e-6 * fit.wcss.max(1e-12));
        }

        #[test]
        fn row_permutation_with_fixed_init(x in points(), seed in any::<u64>()) {
            let k = 3.min(count_distinct_rows(x.view()));
            let init = x.select(Axis(0), &(0..k).collect::<Vec<_>>());
            let a = lloyd(x.view(), init.view(), 300, 0.0).unwrap();
            let mut perm: Vec<usize> = (0..x.nrows()).collect();
            use rand::seq::SliceRandom;
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let xp = x.select(Axis(0), &perm);
            let b = lloyd(xp.view(), init.view(), 300, 0.0).unwrap();
            // same initial centroids in the same order: identical up to rounding
            for (ca, cb) in a.centroids.iter().zip(b.centroids.iter()) {
                prop_assert!((ca - cb).abs() < 1e-9);
            }
        }
    }
}
