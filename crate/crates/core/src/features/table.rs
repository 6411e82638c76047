use std::io::{Read, Write};

use chrono::NaiveDate;
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::io::{csv_reader, expect_header, line_of, non_empty_id, parse_date, parse_f64};

/// Feature values for one participant-day, aligned with
/// [`FeatureTable::names`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub participant_id: String,
    pub date: NaiveDate,
    pub values: Vec<f64>,
}

/// Named feature columns over participant-days, sorted by participant and
/// date.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub vectors: Vec<FeatureVector>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>, mut vectors: Vec<FeatureVector>) -> Result<Self> {
        for v in &vectors {
            if v.values.len() != names.len() {
                return Err(Error::Dimension {
                    expected: names.len(),
                    found: v.values.len(),
                });
            }
            if let Some(bad) = v.values.iter().position(|x| !x.is_finite()) {
                return Err(Error::Invariant(format!(
                    "non-finite `{}` for {} on {}",
                    names[bad], v.participant_id, v.date
                )));
            }
        }
        vectors.sort_by(|a, b| (&a.participant_id, a.date).cmp(&(&b.participant_id, b.date)));
        Ok(Self { names, vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Row-major `n × d` matrix of the feature values.
    pub fn matrix(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.len(), self.dim()));
        for (mut row, v) in m.rows_mut().into_iter().zip(&self.vectors) {
            row.iter_mut().zip(&v.values).for_each(|(dst, &x)| *dst = x);
        }
        m
    }

    /// Keep only rows for which `keep` is true.
    pub fn filter(&self, mut keep: impl FnMut(&FeatureVector) -> bool) -> FeatureTable {
        FeatureTable {
            names: self.names.clone(),
            vectors: self.vectors.iter().filter(|v| keep(v)).cloned().collect(),
        }
    }

    /// Keep the named columns, in the order given.
    pub fn select(&self, columns: &[&str]) -> Result<FeatureTable> {
        let idx = columns
            .iter()
            .map(|c| {
                self.column(c)
                    .ok_or_else(|| Error::Schema(format!("no feature column `{c}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureTable {
            names: columns.iter().map(|c| c.to_string()).collect(),
            vectors: self
                .vectors
                .iter()
                .map(|v| FeatureVector {
                    participant_id: v.participant_id.clone(),
                    date: v.date,
                    values: idx.iter().map(|&i| v.values[i]).collect(),
                })
                .collect(),
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["participant_id".to_string(), "date".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for v in &self.vectors {
            let mut row = vec![v.participant_id.clone(), v.date.to_string()];
            row.extend(v.values.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv_reader(reader);
        let headers = rdr.headers()?.clone();
        expect_header(&headers, &["participant_id", "date"])?;
        let names: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
        let mut vectors = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let line = line_of(&row);
            let values = row
                .iter()
                .skip(2)
                .zip(&names)
                .map(|(f, n)| parse_f64(f, n, line))
                .collect::<Result<Vec<_>>>()?;
            vectors.push(FeatureVector {
                participant_id: non_empty_id(&row[0], line)?,
                date: parse_date(&row[1], line)?,
                values,
            });
        }
        Self::new(names, vectors)
    }
}
