use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CohortTable, DailyRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMethod {
    /// `(x - scale_min) / (scale_max - scale_min)`, independent of the data.
    ScaleBoundsMinmax,
    /// `(x - mean) / sd` with the per-question sample mean and SD.
    Zscore,
}

/// `y = (x - offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub offset: f64,
    pub scale: f64,
}

impl Affine {
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.offset) / self.scale
    }

    pub fn invert(&self, y: f64) -> f64 {
        y * self.scale + self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub method: NormalizationMethod,
    pub transforms: BTreeMap<String, Affine>,
}

impl NormalizationParams {
    pub fn transform(&self, question_id: &str) -> Result<&Affine> {
        self.transforms
            .get(question_id)
            .ok_or_else(|| Error::Schema(format!("no normalization for question `{question_id}`")))
    }

    pub fn apply(&self, record: &DailyRecord) -> Result<DailyRecord> {
        let responses = record
            .responses
            .iter()
            .map(|(q, &v)| Ok((q.clone(), self.transform(q)?.apply(v))))
            .collect::<Result<_>>()?;
        Ok(DailyRecord {
            responses,
            ..record.clone()
        })
    }

    pub fn invert(&self, record: &DailyRecord) -> Result<DailyRecord> {
        let responses = record
            .responses
            .iter()
            .map(|(q, &v)| Ok((q.clone(), self.transform(q)?.invert(v))))
            .collect::<Result<_>>()?;
        Ok(DailyRecord {
            responses,
            ..record.clone()
        })
    }
}

pub fn fit_normalization(table: &CohortTable, method: NormalizationMethod) -> Result<NormalizationParams> {
    if table.records.is_empty() {
        return Err(Error::InsufficientData(
            "cannot fit normalization on an empty cohort".into(),
        ));
    }
    let mut transforms = BTreeMap::new();
    for q in table.registry.questions() {
        let affine = match method {
            NormalizationMethod::ScaleBoundsMinmax => Affine {
                offset: q.scale_min,
                scale: q.scale_max - q.scale_min,
            },
            NormalizationMethod::Zscore => {
                let values: Vec<f64> = table
                    .records
                    .iter()
                    .filter_map(|r| r.responses.get(&q.question_id).copied())
                    .collect();
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                let sd = var.sqrt();
                if !(sd > 0.0) || !sd.is_finite() {
                    return Err(Error::DegenerateScale(q.question_id.clone()));
                }
                Affine {
                    offset: mean,
                    scale: sd,
                }
            }
        };
        transforms.insert(q.question_id.clone(), affine);
    }
    Ok(NormalizationParams { method, transforms })
}
