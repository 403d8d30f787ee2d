//! Simulated-clinician evaluation and benchmark reports.

mod report;
mod simulate;

pub use report::{aggregate, emit_report, format_cell, render_organ_table, render_table, BenchmarkReport, CurveSummary, ReportFiles};
pub use simulate::{evaluate_slices, simulate_revision, RevisionTrace, DEFAULT_MAX_CLICKS};
