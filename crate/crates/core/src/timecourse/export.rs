use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use super::{rank_order, DwellContrast, StateTimecourse};
use crate::error::{Error, Result};
use crate::features::{FeatureTable, FeatureVector};
use crate::io::create;

const WIDTH: f64 = 960.0;
const LEFT: f64 = 140.0;
const RIGHT: f64 = 20.0;
const BAND_TOP: f64 = 30.0;
const BAND_HEIGHT: f64 = 28.0;
const TRACE_HEIGHT: f64 = 46.0;
const TRACE_GAP: f64 = 10.0;
const BAR_HEIGHT: f64 = 120.0;

/// Files written by [`export_timecourse`], in write order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExportBundle {
    pub files: Vec<PathBuf>,
}

fn safe_name(participant_id: &str) -> String {
    participant_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn svg_file_name(participant_id: &str) -> String {
    format!("{}_timecourse.svg", safe_name(participant_id))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Green for the best state through yellow to red for the worst.
fn state_colour(rank: usize, k: usize) -> String {
    let stops = [(26.0, 152.0, 80.0), (254.0, 224.0, 139.0), (215.0, 48.0, 39.0)];
    let t = if k <= 1 { 0.0 } else { rank as f64 / (k - 1) as f64 };
    let (a, b, u) = if t <= 0.5 {
        (stops[0], stops[1], t * 2.0)
    } else {
        (stops[1], stops[2], t * 2.0 - 1.0)
    };
    let mix = |x: f64, y: f64| (x + (y - x) * u).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// SVG for one participant: state band, one trace per feature and, when a
/// contrast is given, pre/post dwell bar charts.
pub fn render_svg(
    timecourse: &StateTimecourse,
    labels: &[String],
    feature_names: &[String],
    features: &[&FeatureVector],
    contrast: Option<&DwellContrast>,
) -> String {
    let order = rank_order(labels);
    let mut rank = vec![0; labels.len()];
    for (r, &s) in order.iter().enumerate() {
        rank[s] = r;
    }
    let k = labels.len();
    let plot_w = WIDTH - LEFT - RIGHT;
    let dates = timecourse
        .entries
        .iter()
        .map(|e| e.date)
        .chain(features.iter().map(|f| f.date));
    let first = dates.clone().min();
    let last = dates.max();
    let span = match (first, last) {
        (Some(a), Some(b)) => (b - a).num_days() + 1,
        _ => 1,
    } as f64;
    let first = first.unwrap_or(NaiveDate::MIN);
    let day_w = plot_w / span;
    let x_of = |d: NaiveDate| LEFT + (d - first).num_days() as f64 * day_w;

    let traces_top = BAND_TOP + BAND_HEIGHT + 20.0;
    let traces_h = feature_names.len() as f64 * (TRACE_HEIGHT + TRACE_GAP);
    let bars_top = traces_top + traces_h + 30.0;
    let height = bars_top + if contrast.is_some() { BAR_HEIGHT + 50.0 } else { 0.0 };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height:.0}" viewBox="0 0 {WIDTH} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{LEFT}" y="18" font-size="13">{}</text>"#,
        escape(&timecourse.participant_id)
    );

    let _ = writeln!(s, r#"<g class="state-band">"#);
    let _ = writeln!(
        s,
        r#"<text x="8" y="{:.2}">state</text>"#,
        BAND_TOP + BAND_HEIGHT / 2.0 + 4.0
    );
    for e in &timecourse.entries {
        let _ = writeln!(
            s,
            r#"<rect class="day" x="{:.2}" y="{BAND_TOP}" width="{:.2}" height="{BAND_HEIGHT}" fill="{}"><title>{} {}</title></rect>"#,
            x_of(e.date),
            day_w,
            state_colour(rank[e.state], k),
            e.date,
            escape(&e.label)
        );
    }
    let _ = writeln!(s, "</g>");

    for (j, name) in feature_names.iter().enumerate() {
        let top = traces_top + j as f64 * (TRACE_HEIGHT + TRACE_GAP);
        let values: Vec<f64> = features.iter().map(|f| f.values[j]).collect();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let y_of = |v: f64| {
            if hi > lo {
                top + TRACE_HEIGHT * (1.0 - (v - lo) / (hi - lo))
            } else {
                top + TRACE_HEIGHT / 2.0
            }
        };
        let points: Vec<String> = features
            .iter()
            .zip(&values)
            .map(|(f, &v)| format!("{:.2},{:.2}", x_of(f.date) + day_w / 2.0, y_of(v)))
            .collect();
        let _ = writeln!(s, r#"<g class="trace">"#);
        let _ = writeln!(
            s,
            r#"<text x="8" y="{:.2}">{}</text>"#,
            top + TRACE_HEIGHT / 2.0 + 4.0,
            escape(name)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{LEFT}" y="{top:.2}" width="{plot_w:.2}" height="{TRACE_HEIGHT}" fill="none" stroke="#ddd"/>"##
        );
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#333" stroke-width="1"/>"##,
            points.join(" ")
        );
        let _ = writeln!(s, "</g>");
    }

    if let Some(c) = contrast {
        let ex = x_of(c.event_date) + day_w / 2.0;
        let _ = writeln!(
            s,
            r##"<line class="event" x1="{ex:.2}" y1="{BAND_TOP}" x2="{ex:.2}" y2="{:.2}" stroke="#000" stroke-dasharray="4 3"/>"##,
            traces_top + traces_h
        );
        let chart_w = (WIDTH - LEFT - RIGHT - 40.0) / 2.0;
        for (i, (class, title, fractions)) in [
            ("dwell-pre", format!("{} days before", c.pre_window), &c.pre_fractions),
            ("dwell-post", format!("{} days after", c.post_window), &c.post_fractions),
        ]
        .into_iter()
        .enumerate()
        {
            let x0 = LEFT + i as f64 * (chart_w + 40.0);
            let bar_w = chart_w / fractions.len().max(1) as f64;
            let _ = writeln!(s, r#"<g class="{class}">"#);
            let _ = writeln!(s, r#"<text x="{x0:.2}" y="{:.2}">{title}</text>"#, bars_top - 6.0);
            for (r, (&f, label)) in fractions.iter().zip(&c.labels).enumerate() {
                let h = BAR_HEIGHT * f;
                let x = x0 + r as f64 * bar_w;
                let _ = writeln!(
                    s,
                    r#"<rect class="bar" x="{:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="{}"/>"#,
                    x + 2.0,
                    bars_top + BAR_HEIGHT - h,
                    bar_w - 4.0,
                    state_colour(r, fractions.len())
                );
                let _ = writeln!(
                    s,
                    r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                    x + bar_w / 2.0,
                    bars_top + BAR_HEIGHT + 14.0,
                    escape(label)
                );
            }
            let _ = writeln!(s, "</g>");
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Write `<id>_states.csv` and `<id>_timecourse.svg` per participant into
/// `dir`. Participants are processed in id order.
pub fn export_timecourse(
    timecourses: &[StateTimecourse],
    labels: &[String],
    features: &FeatureTable,
    contrasts: &[DwellContrast],
    dir: &Path,
) -> Result<ExportBundle> {
    let mut rows: BTreeMap<&str, Vec<&FeatureVector>> = BTreeMap::new();
    for v in &features.vectors {
        rows.entry(&v.participant_id).or_default().push(v);
    }
    let by_participant: BTreeMap<&str, &DwellContrast> =
        contrasts.iter().map(|c| (c.participant_id.as_str(), c)).collect();
    let mut sorted: Vec<&StateTimecourse> = timecourses.iter().collect();
    sorted.sort_by(|a, b| a.participant_id.cmp(&b.participant_id));

    let mut bundle = ExportBundle::default();
    for tc in sorted {
        let pid = tc.participant_id.as_str();
        let csv_path = dir.join(format!("{}_states.csv", safe_name(pid)));
        let mut w = csv::Writer::from_writer(create(&csv_path)?);
        w.write_record(["date", "state_label"])?;
        for e in &tc.entries {
            w.write_record([e.date.to_string(), e.label.clone()])?;
        }
        w.flush().map_err(|e| Error::io(&csv_path, e))?;
        bundle.files.push(csv_path);

        let svg = render_svg(
            tc,
            labels,
            &features.names,
            rows.get(pid).map(Vec::as_slice).unwrap_or(&[]),
            by_participant.get(pid).copied(),
        );
        let svg_path = dir.join(svg_file_name(pid));
        let mut f = create(&svg_path)?;
        f.write_all(svg.as_bytes())
            .and_then(|_| f.flush())
            .map_err(|e| Error::io(&svg_path, e))?;
        bundle.files.push(svg_path);
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timecourse::{dwell_contrast, TimecourseEntry};
    use chrono::TimeDelta;

    fn labels() -> Vec<String> {
        vec!["B".into(), "A".into()]
    }

    fn fixture(days: usize) -> (StateTimecourse, FeatureTable) {
        let start = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        let entries = (0..days)
            .map(|i| TimecourseEntry {
                date: start + TimeDelta::days(i as i64),
                state: i % 2,
                label: labels()[i % 2].clone(),
                distances: vec![0.1, 0.2],
            })
            .collect();
        let vectors = (0..days)
            .map(|i| FeatureVector {
                participant_id: "p<1>".into(),
                date: start + TimeDelta::days(i as i64),
                values: vec![i as f64 / days as f64, 0.5],
            })
            .collect();
        (
            StateTimecourse {
                participant_id: "p<1>".into(),
                entries,
            },
            FeatureTable::new(vec!["pain".into(), "mood".into()], vectors).unwrap(),
        )
    }

    #[test]
    fn ten_days_give_one_band_of_ten_cells() {
        let (tc, table) = fixture(10);
        let rows: Vec<&FeatureVector> = table.vectors.iter().collect();
        let svg = render_svg(&tc, &labels(), &table.names, &rows, None);
        assert_eq!(svg.matches(r#"class="state-band""#).count(), 1);
        assert_eq!(svg.matches(r#"class="day""#).count(), 10);
        assert_eq!(svg.matches(r#"class="trace""#).count(), 2);
        assert!(!svg.contains("dwell-pre"));
        assert!(svg.contains("p&lt;1&gt;"));
    }

    #[test]
    fn event_adds_bar_chart_pair() {
        let (tc, table) = fixture(20);
        let event = tc.entries[10].date;
        let c = dwell_contrast(&tc, &labels(), event, 5, 5).unwrap();
        let rows: Vec<&FeatureVector> = table.vectors.iter().collect();
        let svg = render_svg(&tc, &labels(), &table.names, &rows, Some(&c));
        assert_eq!(svg.matches(r#"class="dwell-pre""#).count(), 1);
        assert_eq!(svg.matches(r#"class="dwell-post""#).count(), 1);
        assert_eq!(svg.matches(r#"class="bar""#).count(), 4);
    }

    #[test]
    fn bundle_files() {
        let dir = std::env::temp_dir().join(format!("pstates-export-{}", std::process::id()));
        let empty = FeatureTable::new(vec!["pain".into()], vec![]).unwrap();
        assert!(export_timecourse(&[], &labels(), &empty, &[], &dir)
            .unwrap()
            .files
            .is_empty());

        let (tc, table) = fixture(4);
        let bundle = export_timecourse(&[tc], &labels(), &table, &[], &dir).unwrap();
        let names: Vec<_> = bundle
            .files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, vec!["p_1__states.csv", "p_1__timecourse.svg"]);
        let csv = std::fs::read_to_string(&bundle.files[0]).unwrap();
        assert_eq!(csv.lines().count(), 5);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn colours_run_green_to_red() {
        assert_eq!(state_colour(0, 5), "#1a9850");
        assert_eq!(state_colour(4, 5), "#d73027");
        assert_eq!(state_colour(0, 1), "#1a9850");
    }
}
