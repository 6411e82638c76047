//! Day-by-day state labels and how time spent in each state shifts around
//! clinical events.

mod assign;
mod dwell;
mod events;
mod export;

pub use assign::{assign_states, read_assignments, write_assignments, StateTimecourse, TimecourseEntry};
pub use dwell::{dwell_contrast, dwell_contrasts, DwellConfig, DwellContrast};
pub use events::{event_dates, parse_events, write_events, EventRecord, EVENTS_HEADER};
pub use export::{export_timecourse, render_svg, svg_file_name, ExportBundle};

/// Labels ordered from best to worst (`A`, `B`, ...).
pub(crate) fn rank_order(labels: &[String]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| (labels[a].len(), &labels[a]).cmp(&(labels[b].len(), &labels[b])));
    order
}
