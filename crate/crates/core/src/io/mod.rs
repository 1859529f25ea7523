//! Wire formats and report emission.
//!
//! Evidence and truth arrive as line-delimited CSV records; results
//! leave as delimited tables or structured JSON. All emission is
//! byte-deterministic for identical inputs, with probabilities rendered
//! at a fixed six decimal places, so reports diff cleanly and fixtures
//! stay stable.

mod records;
mod reports;

pub use records::{
    emit_evidence, emit_truths, parse_evidence, parse_truths, records_to_cases, EvidenceRecord,
    ParseError, TruthRecord,
};
pub use reports::{
    parse_outcomes, write_bias_report, write_confusion, write_histograms, write_outcomes,
    write_sweep, write_visibility_ledger, ReportError, ReportFormat,
};

/// Fixed decimal precision used for every probability we render.
pub(crate) fn format_probability(p: f64) -> String {
    format!("{p:.6}")
}
