use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use nalgebra::DMatrix;
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Demographics;
use crate::io::{csv_reader, expect_header, line_of, non_empty_id, parse_date, parse_f64};

/// Precomputed numeric voice features, one row per participant-day.
/// Column meaning is opaque to the toolkit.
#[derive(Debug, Clone, PartialEq)]
pub struct VoiceTable {
    pub feature_names: Vec<String>,
    pub keys: Vec<(String, NaiveDate)>,
    pub values: Array2<f64>,
}

impl VoiceTable {
    /// Parse `participant_id,date,<features...>`. Several recordings on the
    /// same day are averaged.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv_reader(reader);
        let headers = rdr.headers()?.clone();
        expect_header(&headers, &["participant_id", "date"])?;
        let feature_names: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
        if feature_names.is_empty() {
            return Err(Error::Schema("voice table has no feature columns".into()));
        }
        let mut acc: BTreeMap<(String, NaiveDate), (Vec<f64>, usize)> = BTreeMap::new();
        for row in rdr.records() {
            let row = row?;
            let line = line_of(&row);
            let key = (non_empty_id(&row[0], line)?, parse_date(&row[1], line)?);
            let entry = acc.entry(key).or_insert_with(|| (vec![0.0; feature_names.len()], 0));
            for (dst, (field, name)) in entry.0.iter_mut().zip(row.iter().skip(2).zip(&feature_names)) {
                *dst += parse_f64(field, name, line)?;
            }
            entry.1 += 1;
        }
        let mut values = Array2::zeros((acc.len(), feature_names.len()));
        let mut keys = Vec::with_capacity(acc.len());
        for (mut row, (key, (sum, n))) in values.rows_mut().into_iter().zip(acc) {
            row.iter_mut().zip(sum).for_each(|(dst, s)| *dst = s / n as f64);
            keys.push(key);
        }
        Ok(Self {
            feature_names,
            keys,
            values,
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["participant_id".to_string(), "date".to_string()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for ((p, d), row) in self.keys.iter().zip(self.values.rows()) {
            let mut rec = vec![p.clone(), d.to_string()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Residualize against age and sex, then reduce with PCA.
    pub fn reduce(
        &self,
        demographics: &BTreeMap<String, Demographics>,
        var_threshold: f64,
    ) -> Result<(VoiceScores, VoiceComponents)> {
        let mut age = Vec::with_capacity(self.keys.len());
        let mut sex = Vec::with_capacity(self.keys.len());
        for (p, _) in &self.keys {
            let d = demographics
                .get(p)
                .ok_or_else(|| Error::Schema(format!("no demographics for participant `{p}`")))?;
            age.push(d.age);
            sex.push(d.sex);
        }
        let residualized = residualize(&self.values, &age, &sex)?;
        let mut components = pca_reduce(&residualized.residuals, var_threshold)?;
        components.residualization = residualized.coefficients;
        components.dropped_covariates = residualized.dropped;
        let names = (0..components.n_components()).map(super::voice_feature_name).collect();
        let by_day = self
            .keys
            .iter()
            .cloned()
            .zip(components.scores.rows().into_iter().map(|r| r.to_vec()))
            .collect();
        Ok((VoiceScores { names, by_day }, components))
    }
}

/// Voice component scores keyed by participant-day.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VoiceScores {
    pub names: Vec<String>,
    pub by_day: BTreeMap<(String, NaiveDate), Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariate {
    Age,
    Sex,
}

/// Per-feature OLS fit `x = intercept + age_slope * age + sex_slope * sex`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualCoefficients {
    pub intercept: f64,
    pub age: f64,
    pub sex: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residualized {
    pub residuals: Array2<f64>,
    pub coefficients: Vec<ResidualCoefficients>,
    /// Covariates left out because the design was rank deficient.
    pub dropped: Vec<Covariate>,
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Replace every column by its residuals from an ordinary least-squares fit
/// on `[1, age, sex]`. Covariates that are constant, or collinear with an
/// earlier covariate, are dropped (down to an intercept-only fit) with a
/// warning.
pub fn residualize(matrix: &Array2<f64>, age: &[f64], sex: &[f64]) -> Result<Residualized> {
    let (n, p) = matrix.dim();
    if age.len() != n || sex.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: age.len().min(sex.len()),
        });
    }
    if n == 0 {
        return Err(Error::InsufficientData("no rows to residualize".into()));
    }

    let (age_mean, age_sd) = mean_sd(age);
    let (sex_mean, sex_sd) = mean_sd(sex);
    let constant = |mean: f64, sd: f64| !(sd > 1e-12 * mean.abs().max(1.0));
    let mut kept: Vec<(Covariate, f64, &[f64])> = Vec::new();
    let mut dropped = Vec::new();
    if constant(age_mean, age_sd) {
        dropped.push(Covariate::Age);
    } else {
        kept.push((Covariate::Age, age_mean, age));
    }
    if constant(sex_mean, sex_sd) {
        dropped.push(Covariate::Sex);
    } else if kept.is_empty() {
        kept.push((Covariate::Sex, sex_mean, sex));
    } else {
        let cov = age
            .iter()
            .zip(sex)
            .map(|(a, s)| (a - age_mean) * (s - sex_mean))
            .sum::<f64>()
            / n as f64;
        if (cov / (age_sd * sex_sd)).abs() > 1.0 - 1e-10 {
            dropped.push(Covariate::Sex);
        } else {
            kept.push((Covariate::Sex, sex_mean, sex));
        }
    }
    if !dropped.is_empty() {
        log::warn!("rank-deficient covariate design, dropped {dropped:?} from residualization");
    }

    let col_means = matrix.mean_axis(Axis(0)).expect("n > 0");
    let y = DMatrix::from_fn(n, p, |i, j| matrix[[i, j]] - col_means[j]);
    let slopes = if kept.is_empty() {
        DMatrix::zeros(0, p)
    } else {
        let x = DMatrix::from_fn(n, kept.len(), |i, c| kept[c].2[i] - kept[c].1);
        x.clone()
            .svd(true, true)
            .solve(&y, 1e-12)
            .map_err(|e| Error::Invariant(format!("least squares failed: {e}")))?
            .clone_owned()
    };

    let mut residuals = Array2::zeros((n, p));
    let mut coefficients = Vec::with_capacity(p);
    for j in 0..p {
        let mut coef = ResidualCoefficients {
            intercept: col_means[j],
            age: 0.0,
            sex: 0.0,
        };
        for (c, &(cov, mean, _)) in kept.iter().enumerate() {
            let b = slopes[(c, j)];
            match cov {
                Covariate::Age => coef.age = b,
                Covariate::Sex => coef.sex = b,
            }
            coef.intercept -= b * mean;
        }
        for i in 0..n {
            let mut fitted = 0.0;
            for (c, &(_, mean, values)) in kept.iter().enumerate() {
                fitted += slopes[(c, j)] * (values[i] - mean);
            }
            residuals[[i, j]] = y[(i, j)] - fitted;
        }
        coefficients.push(coef);
    }
    Ok(Residualized {
        residuals,
        coefficients,
        dropped,
    })
}

/// Principal components of a residualized voice table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiceComponents {
    /// Column means removed before the decomposition.
    pub means: Vec<f64>,
    /// `features × components`; each column is a unit-norm loading vector.
    pub loadings: Vec<Vec<f64>>,
    pub explained_variance_ratio: Vec<f64>,
    pub var_threshold: f64,
    pub residualization: Vec<ResidualCoefficients>,
    pub dropped_covariates: Vec<Covariate>,
    #[serde(skip)]
    pub scores: Array2<f64>,
}

impl VoiceComponents {
    pub fn n_components(&self) -> usize {
        self.explained_variance_ratio.len()
    }

    pub fn loadings_matrix(&self) -> Array2<f64> {
        let p = self.loadings.len();
        let m = self.n_components();
        Array2::from_shape_fn((p, m), |(i, j)| self.loadings[i][j])
    }

    /// Project already-residualized rows onto the retained components.
    pub fn project(&self, residual: &Array2<f64>) -> Result<Array2<f64>> {
        if residual.ncols() != self.means.len() {
            return Err(Error::Dimension {
                expected: self.means.len(),
                found: residual.ncols(),
            });
        }
        let centered = residual - &ndarray::Array1::from(self.means.clone());
        Ok(centered.dot(&self.loadings_matrix()))
    }
}

/// Centre the columns, take the SVD and keep every component whose share of
/// total variance is at least `var_threshold`. Loading signs are fixed so
/// that the largest-magnitude entry of each component is positive.
pub fn pca_reduce(residual: &Array2<f64>, var_threshold: f64) -> Result<VoiceComponents> {
    let (n, p) = residual.dim();
    if n < 2 {
        return Err(Error::InsufficientData(format!("PCA needs at least 2 rows, found {n}")));
    }
    if !(var_threshold > 0.0 && var_threshold < 1.0) {
        return Err(Error::config("var_threshold", "must lie in (0, 1)"));
    }
    let means: Vec<f64> = residual.mean_axis(Axis(0)).expect("n > 0").to_vec();
    let centered = DMatrix::from_fn(n, p, |i, j| residual[[i, j]] - means[j]);
    let svd = centered.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let sv = &svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    let total: f64 = sv.iter().map(|s| s * s).sum();
    if !(total > 0.0) {
        return Err(Error::InsufficientData("voice table has no variance".into()));
    }

    let mut loadings: Vec<Vec<f64>> = vec![Vec::new(); p];
    let mut ratios = Vec::new();
    for &c in &order {
        let ratio = sv[c] * sv[c] / total;
        if ratio < var_threshold {
            break;
        }
        let mut v: Vec<f64> = v_t.row(c).iter().copied().collect();
        // first entry within rounding of the largest magnitude
        let largest = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let pivot = v.iter().position(|x| x.abs() >= largest - 1e-12).unwrap_or(0);
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for (row, x) in loadings.iter_mut().zip(v) {
            row.push(x);
        }
        ratios.push(ratio);
    }

    let mut out = VoiceComponents {
        means,
        loadings,
        explained_variance_ratio: ratios,
        var_threshold,
        residualization: Vec::new(),
        dropped_covariates: Vec::new(),
        scores: Array2::zeros((0, 0)),
    };
    out.scores = out.project(residual)?;
    Ok(out)
}
