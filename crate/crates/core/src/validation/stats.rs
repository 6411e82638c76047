use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

struct Centered {
    dev: Vec<f64>,
    norm: f64,
}

fn center(v: &[f64], what: &str) -> Result<Centered> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let dev: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let norm = dev.iter().map(|d| d * d).sum::<f64>().sqrt();
    if norm <= 1e-12 * (1.0 + mean.abs()) * (v.len() as f64).sqrt() {
        return Err(Error::UndefinedCorrelation(format!("{what} is constant")));
    }
    Ok(Centered { dev, norm })
}

fn check_inputs(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 3 pairs, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::UndefinedCorrelation("non-finite input".into()));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_inputs(x, y)?;
    let cx = center(x, "x")?;
    let cy = center(y, "y")?;
    Ok((dot(&cx.dev, &cy.dev) / (cx.norm * cy.norm)).clamp(-1.0, 1.0))
}

/// Pearson r and its two-sided p-value from Student's t with `n - 2`
/// degrees of freedom.
pub fn correlate(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let r = pearson(x, y)?;
    let df = (x.len() - 2) as f64;
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Invariant(e.to_string()))?;
        2.0 * dist.sf(t.abs())
    };
    // keep p strictly positive when it underflows
    Ok((r, p.clamp(f64::MIN_POSITIVE, 1.0)))
}

/// Permutation p-value for `|r|`, shuffling `y`.
pub fn permutation_test(x: &[f64], y: &[f64], n_perm: usize, seed: u64) -> Result<f64> {
    permutation_test_stream(x, y, n_perm, seed, 0)
}

/// As [`permutation_test`], drawing from stream `stream` of the seeded
/// generator so independent cells can run in any order.
pub fn permutation_test_stream(x: &[f64], y: &[f64], n_perm: usize, seed: u64, stream: u64) -> Result<f64> {
    let r = pearson(x, y)?;
    let cx = center(x, "x")?;
    let cy = center(y, "y")?;
    let scale = cx.norm * cy.norm;
    // floating-point slack so that exact ties count as ties
    let threshold = r.abs() * (1.0 - 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut shuffled = cy.dev;
    let mut hits = 0usize;
    for _ in 0..n_perm {
        shuffled.shuffle(&mut rng);
        if (dot(&cx.dev, &shuffled) / scale).abs() >= threshold {
            hits += 1;
        }
    }
    Ok((1 + hits) as f64 / (n_perm + 1) as f64)
}
