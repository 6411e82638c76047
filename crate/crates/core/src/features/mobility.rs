use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::WatchCoverage;
use crate::io::{csv_reader, expect_header, line_of, non_empty_id, parse_f64};

pub const ZONE_COUNT: usize = 5;
pub const ACTIGRAPHY_HEADER: [&str; 3] = ["participant_id", "timestamp", "activity_rate"];

#[derive(Debug, Clone, PartialEq)]
pub struct ActigraphySample {
    pub participant_id: String,
    pub timestamp: NaiveDateTime,
    pub activity_rate: f64,
}

/// Windowing and zone boundaries for effective mobility.
///
/// A window whose mean rate `r` satisfies `thresholds[z-1] <= r < thresholds[z]`
/// falls in zone `z`; below the first threshold is zone 0 and at or above the
/// last is zone 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZoneConfig {
    pub window_minutes: u32,
    pub thresholds: [f64; ZONE_COUNT - 1],
}

impl Default for ZoneConfig {
    fn default() -> Self {
        // MET-like activity rates: rest, light, moderate, hard, vigorous.
        Self {
            window_minutes: 10,
            thresholds: [1.5, 3.0, 4.5, 6.0],
        }
    }
}

impl ZoneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_minutes == 0 || 1440 % self.window_minutes != 0 {
            return Err(Error::config("window_minutes", "must be a positive divisor of 1440"));
        }
        if self.thresholds.iter().any(|t| !t.is_finite()) || self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("thresholds", "must be finite and strictly increasing"));
        }
        Ok(())
    }

    pub fn zone(&self, rate: f64) -> usize {
        self.thresholds.iter().take_while(|&&t| rate >= t).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityProfile {
    pub participant_id: String,
    pub date: NaiveDate,
    pub zone_fractions: [f64; ZONE_COUNT],
    pub effective_mobility: f64,
}

pub fn parse_actigraphy<R: Read>(reader: R) -> Result<Vec<ActigraphySample>> {
    let mut rdr = csv_reader(reader);
    expect_header(rdr.headers()?, &ACTIGRAPHY_HEADER)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        let timestamp = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"]
            .iter()
            .find_map(|f| NaiveDateTime::parse_from_str(&row[1], f).ok())
            .ok_or_else(|| Error::Parse {
                line,
                message: format!("`{}` is not an ISO-8601 timestamp", &row[1]),
            })?;
        let activity_rate = parse_f64(&row[2], "activity_rate", line)?;
        if activity_rate < 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("negative activity_rate {activity_rate}"),
            });
        }
        out.push(ActigraphySample {
            participant_id: non_empty_id(&row[0], line)?,
            timestamp,
            activity_rate,
        });
    }
    Ok(out)
}

/// Bucket samples into fixed windows, assign each window a zone from its
/// mean rate and summarise every participant-day.
pub fn derive_zones(samples: &[ActigraphySample], config: &ZoneConfig) -> Result<Vec<MobilityProfile>> {
    config.validate()?;
    // (participant, date, window index) -> (sum, count)
    let mut windows: BTreeMap<(&str, NaiveDate, u32), (f64, usize)> = BTreeMap::new();
    for s in samples {
        let t = s.timestamp.time();
        let minute = t.hour() * 60 + t.minute();
        let w = windows
            .entry((&s.participant_id, s.timestamp.date(), minute / config.window_minutes))
            .or_default();
        w.0 += s.activity_rate;
        w.1 += 1;
    }

    let mut days: BTreeMap<(&str, NaiveDate), [usize; ZONE_COUNT]> = BTreeMap::new();
    for ((p, d, _), (sum, n)) in windows {
        days.entry((p, d)).or_default()[config.zone(sum / n as f64)] += 1;
    }

    Ok(days
        .into_iter()
        .filter_map(|((p, date), counts)| {
            let total: usize = counts.iter().sum();
            if total == 0 {
                return None;
            }
            let zone_fractions = counts.map(|c| c as f64 / total as f64);
            let effective_mobility = zone_fractions
                .iter()
                .enumerate()
                .map(|(z, f)| z as f64 / (ZONE_COUNT - 1) as f64 * f)
                .sum::<f64>()
                .clamp(0.0, 1.0);
            Some(MobilityProfile {
                participant_id: p.to_string(),
                date,
                zone_fractions,
                effective_mobility,
            })
        })
        .collect())
}

pub fn watch_coverage(profiles: &[MobilityProfile]) -> WatchCoverage {
    let mut out = WatchCoverage::new();
    for p in profiles {
        *out.entry(p.participant_id.clone()).or_default() += 1;
    }
    out
}

pub fn write_mobility<W: Write>(profiles: &[MobilityProfile], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "participant_id",
        "date",
        "zone_0",
        "zone_1",
        "zone_2",
        "zone_3",
        "zone_4",
        "effective_mobility",
    ])?;
    for p in profiles {
        let mut row = vec![p.participant_id.clone(), p.date.to_string()];
        row.extend(p.zone_fractions.iter().map(f64::to_string));
        row.push(p.effective_mobility.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn day_samples(rates: &[f64]) -> Vec<ActigraphySample> {
        let start = NaiveDate::from_ymd_opt(2020, 5, 1)
            .unwrap()
            .and_hms_opt(8, 0, 0)
            .unwrap();
        rates
            .iter()
            .enumerate()
            .map(|(i, &r)| ActigraphySample {
                participant_id: "p".into(),
                timestamp: start + chrono::TimeDelta::minutes(10 * i as i64),
                activity_rate: r,
            })
            .collect()
    }

    #[test]
    fn all_rest() {
        let p = derive_zones(&day_samples(&[0.1; 12]), &ZoneConfig::default()).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].zone_fractions, [1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(p[0].effective_mobility, 0.0);
    }

    #[test]
    fn all_vigorous() {
        let p = derive_zones(&day_samples(&[9.0; 12]), &ZoneConfig::default()).unwrap();
        assert_eq!(p[0].zone_fractions, [0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(p[0].effective_mobility, 1.0);
    }

    #[test]
    fn half_rest_half_vigorous() {
        let mut rates = vec![0.0; 6];
        rates.extend([7.0; 6]);
        let p = derive_zones(&day_samples(&rates), &ZoneConfig::default()).unwrap();
        assert_eq!(p[0].effective_mobility, 0.5);
    }

    #[test]
    fn window_uses_mean_of_its_samples() {
        let start = NaiveDate::from_ymd_opt(2020, 5, 1)
            .unwrap()
            .and_hms_opt(9, 0, 0)
            .unwrap();
        // two samples in the same 10-minute window: mean 3.5 -> zone 2
        let s = [1.0, 6.0]
            .iter()
            .enumerate()
            .map(|(i, &r)| ActigraphySample {
                participant_id: "p".into(),
                timestamp: start + chrono::TimeDelta::minutes(3 * i as i64),
                activity_rate: r,
            })
            .collect::<Vec<_>>();
        let p = derive_zones(&s, &ZoneConfig::default()).unwrap();
        assert_eq!(p[0].zone_fractions, [0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn thresholds_must_increase() {
        let cfg = ZoneConfig {
            thresholds: [1.0, 3.0, 2.0, 5.0],
            ..ZoneConfig::default()
        };
        assert!(matches!(derive_zones(&[], &cfg), Err(Error::Config { .. })));
    }

    #[test]
    fn parse_rejects_negative_rates() {
        let text = "participant_id,timestamp,activity_rate\np,2020-01-01T08:00:00,-1\n";
        assert!(parse_actigraphy(text.as_bytes()).is_err());
        let text = "participant_id,timestamp,activity_rate\np,2020-01-01T08:00:00,2.5\n";
        assert_eq!(parse_actigraphy(text.as_bytes()).unwrap()[0].activity_rate, 2.5);
    }

    proptest! {
        #[test]
        fn fractions_are_a_distribution_and_order_free(
            rates in proptest::collection::vec(0.0f64..10.0, 1..60),
            seed in any::<u64>(),
        ) {
            let cfg = ZoneConfig::default();
            let samples = day_samples(&rates);
            let p = derive_zones(&samples, &cfg).unwrap();
            let sum: f64 = p[0].zone_fractions.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&p[0].effective_mobility));

            let mut shuffled = samples.clone();
            use rand::{seq::SliceRandom, SeedableRng};
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let q = derive_zones(&shuffled, &cfg).unwrap();
            prop_assert_eq!(p, q);
        }
    }
}
