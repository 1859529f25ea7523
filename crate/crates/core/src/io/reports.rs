//! Report emission: outcomes, confusion matrices, sweeps, histograms.
//!
//! Two formats are supported. `DelimitedTable` writes CSV with a header
//! row; `Structured` writes JSON with sorted keys. Both are
//! byte-deterministic; probabilities and rates appear with six decimal
//! places (as strings in JSON), and undefined metrics render as `nan`
//! (`null` in JSON). Confusion tables keep a fixed layout: rows
//! no-label, positive, negative, other; columns not-assessed,
//! no-decision, positive, negative; marginals labeled `all`.

use std::io::{Read, Write};

use serde_json::json;
use thiserror::Error;

use crate::evaluation::{
    AccuracyMode, ConfusionMatrix, DecisionColumn, ProbabilityHistograms, SweepGrid, TruthClass,
};
use crate::pipeline::{BuildingOutcome, Outcome};
use crate::synth::{BiasReport, VisibilityRecord};
use crate::task::{Stream, TaskId};

use super::format_probability;
use super::records::ParseError;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Output flavor for every report writer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    DelimitedTable,
    Structured,
}

fn truth_class_label(task: TaskId, class: TruthClass) -> &'static str {
    match class {
        TruthClass::NoLabel => "no_label",
        TruthClass::Positive => task.positive_label(),
        TruthClass::Negative => task.negative_label(),
        TruthClass::Other => "other",
    }
}

fn decision_column_label(task: TaskId, column: DecisionColumn) -> &'static str {
    match column {
        DecisionColumn::Unassessed => match task.stream() {
            Stream::PreEvent => "no_evidence",
            Stream::PostEvent | Stream::Gate => "no_OV",
        },
        DecisionColumn::NoDecision => "ND",
        DecisionColumn::Positive => task.positive_label(),
        DecisionColumn::Negative => task.negative_label(),
    }
}

fn optional_rate(value: Option<f64>) -> String {
    value.map(format_probability).unwrap_or_else(|| "nan".to_string())
}

fn optional_rate_json(value: Option<f64>) -> serde_json::Value {
    match value {
        Some(v) => json!(format_probability(v)),
        None => serde_json::Value::Null,
    }
}

const OUTCOMES_HEADER: [&str; 5] = ["building_id", "task", "outcome", "fused_p", "n_images_used"];

/// Writes pipeline outcomes, one row per (building, task).
pub fn write_outcomes<W: Write>(
    outcomes: &[BuildingOutcome],
    format: ReportFormat,
    writer: W,
) -> Result<(), ReportError> {
    match format {
        ReportFormat::DelimitedTable => {
            let mut csv_writer = csv::Writer::from_writer(writer);
            csv_writer.write_record(OUTCOMES_HEADER)?;
            for o in outcomes {
                csv_writer.write_record([
                    o.building_id.as_str(),
                    o.task.name(),
                    o.outcome.name(),
                    &o.fused_p.map(format_probability).unwrap_or_default(),
                    &o.n_images_used.to_string(),
                ])?;
            }
            csv_writer.flush()?;
        }
        ReportFormat::Structured => {
            let rows: Vec<_> = outcomes
                .iter()
                .map(|o| {
                    json!({
                        "building_id": o.building_id,
                        "task": o.task.name(),
                        "outcome": o.outcome.name(),
                        "fused_p": o.fused_p.map(format_probability),
                        "n_images_used": o.n_images_used,
                    })
                })
                .collect();
            write_json(writer, &json!({ "outcomes": rows }))?;
        }
    }
    Ok(())
}

/// Reads outcomes back from the delimited form written by
/// [`write_outcomes`].
pub fn parse_outcomes<R: Read>(reader: R) -> Result<Vec<BuildingOutcome>, ParseError> {
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = csv_reader.headers()?;
    if !headers.is_empty() && !headers.iter().eq(OUTCOMES_HEADER.iter().copied()) {
        return Err(ParseError::Header { expected: &OUTCOMES_HEADER });
    }
    let mut outcomes = Vec::new();
    for row in csv_reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let fail = |reason: String| ParseError::Record { line, reason };
        if row.len() != OUTCOMES_HEADER.len() {
            return Err(fail(format!(
                "expected {} fields, found {}",
                OUTCOMES_HEADER.len(),
                row.len()
            )));
        }
        let task = TaskId::parse(&row[1]).ok_or_else(|| fail(format!("unknown task {:?}", &row[1])))?;
        let outcome =
            Outcome::parse(&row[2]).ok_or_else(|| fail(format!("unknown outcome {:?}", &row[2])))?;
        let fused_p = if row[3].is_empty() {
            None
        } else {
            let p: f64 = row[3]
                .parse()
                .map_err(|_| fail(format!("cannot parse probability {:?}", &row[3])))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(fail(format!("probability out of range ({})", &row[3])));
            }
            Some(p)
        };
        if fused_p.is_some() != outcome.is_decided_or_nd() {
            return Err(fail(format!(
                "outcome {} and fused_p presence disagree",
                outcome.name()
            )));
        }
        let n_images_used: usize = row[4]
            .parse()
            .map_err(|_| fail(format!("cannot parse image count {:?}", &row[4])))?;
        outcomes.push(BuildingOutcome {
            building_id: row[0].to_string(),
            task,
            outcome,
            fused_p,
            n_images_used,
        });
    }
    Ok(outcomes)
}

/// Writes a confusion matrix with marginals in the fixed table layout.
pub fn write_confusion<W: Write>(
    matrix: &ConfusionMatrix,
    task: TaskId,
    format: ReportFormat,
    writer: W,
) -> Result<(), ReportError> {
    match format {
        ReportFormat::DelimitedTable => {
            let mut csv_writer = csv::Writer::from_writer(writer);
            let mut header = vec!["truth".to_string()];
            header.extend(
                DecisionColumn::ALL
                    .iter()
                    .map(|&c| decision_column_label(task, c).to_string()),
            );
            header.push("all".to_string());
            csv_writer.write_record(&header)?;
            for row in TruthClass::ALL {
                let mut record = vec![truth_class_label(task, row).to_string()];
                record.extend(
                    DecisionColumn::ALL.iter().map(|&c| matrix.count(row, c).to_string()),
                );
                record.push(matrix.row_total(row).to_string());
                csv_writer.write_record(&record)?;
            }
            let mut totals = vec!["all".to_string()];
            totals.extend(
                DecisionColumn::ALL.iter().map(|&c| matrix.column_total(c).to_string()),
            );
            totals.push(matrix.grand_total().to_string());
            csv_writer.write_record(&totals)?;
            csv_writer.flush()?;
        }
        ReportFormat::Structured => {
            let columns: Vec<_> = DecisionColumn::ALL
                .iter()
                .map(|&c| decision_column_label(task, c))
                .collect();
            let rows: Vec<_> = TruthClass::ALL
                .iter()
                .map(|&row| {
                    json!({
                        "truth": truth_class_label(task, row),
                        "counts": DecisionColumn::ALL
                            .iter()
                            .map(|&c| matrix.count(row, c))
                            .collect::<Vec<_>>(),
                        "total": matrix.row_total(row),
                    })
                })
                .collect();
            let value = json!({
                "task": task.name(),
                "columns": columns,
                "rows": rows,
                "column_totals": DecisionColumn::ALL
                    .iter()
                    .map(|&c| matrix.column_total(c))
                    .collect::<Vec<_>>(),
                "grand_total": matrix.grand_total(),
                "summary": {
                    "correct": matrix.correct(),
                    "incorrect": matrix.incorrect(),
                    "no_decision": matrix.no_decision_total(),
                    "permissible": matrix.permissible(),
                    "accuracy_over_decided":
                        optional_rate_json(matrix.accuracy(AccuracyMode::OverDecided).ok()),
                    "accuracy_over_permissible":
                        optional_rate_json(matrix.accuracy(AccuracyMode::OverPermissible).ok()),
                    "nd_rate": optional_rate_json(matrix.nd_rate().ok()),
                },
            });
            write_json(writer, &value)?;
        }
    }
    Ok(())
}

/// Writes sweep cells in grid order.
pub fn write_sweep<W: Write>(
    grid: &SweepGrid,
    format: ReportFormat,
    writer: W,
) -> Result<(), ReportError> {
    match format {
        ReportFormat::DelimitedTable => {
            let mut csv_writer = csv::Writer::from_writer(writer);
            csv_writer.write_record([
                "alpha1",
                "alpha2",
                "accuracy_over_decided",
                "accuracy_over_permissible",
                "nd_rate",
            ])?;
            for cell in &grid.cells {
                csv_writer.write_record([
                    format_probability(cell.alpha1),
                    format_probability(cell.alpha2),
                    optional_rate(cell.accuracy_over_decided),
                    optional_rate(cell.accuracy_over_permissible),
                    optional_rate(cell.nd_rate),
                ])?;
            }
            csv_writer.flush()?;
        }
        ReportFormat::Structured => {
            let cells: Vec<_> = grid
                .cells
                .iter()
                .map(|cell| {
                    json!({
                        "alpha1": format_probability(cell.alpha1),
                        "alpha2": format_probability(cell.alpha2),
                        "accuracy_over_decided": optional_rate_json(cell.accuracy_over_decided),
                        "accuracy_over_permissible":
                            optional_rate_json(cell.accuracy_over_permissible),
                        "nd_rate": optional_rate_json(cell.nd_rate),
                    })
                })
                .collect();
            let value = json!({
                "alpha1_values": grid.alpha1_values.iter().copied()
                    .map(format_probability).collect::<Vec<_>>(),
                "alpha2_values": grid.alpha2_values.iter().copied()
                    .map(format_probability).collect::<Vec<_>>(),
                "cells": cells,
            });
            write_json(writer, &value)?;
        }
    }
    Ok(())
}

/// Writes fused-probability histograms, one row per populated bin set.
pub fn write_histograms<W: Write>(
    histograms: &ProbabilityHistograms,
    task: TaskId,
    format: ReportFormat,
    writer: W,
) -> Result<(), ReportError> {
    match format {
        ReportFormat::DelimitedTable => {
            let mut csv_writer = csv::Writer::from_writer(writer);
            csv_writer.write_record(["truth", "decision", "bin_lo", "bin_hi", "count"])?;
            for (truth, decision, counts) in histograms.pairs() {
                for (index, &count) in counts.iter().enumerate() {
                    let (lo, hi) = histograms.bin_range(index);
                    csv_writer.write_record([
                        truth_class_label(task, truth),
                        decision_column_label(task, decision),
                        &format_probability(lo),
                        &format_probability(hi),
                        &count.to_string(),
                    ])?;
                }
            }
            csv_writer.flush()?;
        }
        ReportFormat::Structured => {
            let pairs: Vec<_> = histograms
                .pairs()
                .map(|(truth, decision, counts)| {
                    json!({
                        "truth": truth_class_label(task, truth),
                        "decision": decision_column_label(task, decision),
                        "counts": counts,
                    })
                })
                .collect();
            let value = json!({
                "task": task.name(),
                "bins": histograms.bins(),
                "pairs": pairs,
            });
            write_json(writer, &value)?;
        }
    }
    Ok(())
}

/// Writes the per-truth-class image-count summary of a mission.
pub fn write_bias_report<W: Write>(
    report: &BiasReport,
    format: ReportFormat,
    writer: W,
) -> Result<(), ReportError> {
    match format {
        ReportFormat::DelimitedTable => {
            let mut csv_writer = csv::Writer::from_writer(writer);
            csv_writer.write_record([
                "truth",
                "buildings",
                "total_images",
                "mean_images",
                "min_images",
                "max_images",
            ])?;
            for (label, stats) in &report.classes {
                csv_writer.write_record([
                    label.render(report.task),
                    &stats.buildings.to_string(),
                    &stats.total_images.to_string(),
                    &format_probability(stats.mean),
                    &stats.min.to_string(),
                    &stats.max.to_string(),
                ])?;
            }
            csv_writer.flush()?;
        }
        ReportFormat::Structured => {
            let classes: Vec<_> = report
                .classes
                .iter()
                .map(|(label, stats)| {
                    json!({
                        "truth": label.render(report.task),
                        "buildings": stats.buildings,
                        "total_images": stats.total_images,
                        "mean_images": format_probability(stats.mean),
                        "min_images": stats.min,
                        "max_images": stats.max,
                    })
                })
                .collect();
            write_json(writer, &json!({ "task": report.task.name(), "classes": classes }))?;
        }
    }
    Ok(())
}

/// Writes the hidden per-image damage-visibility ledger of a synthetic
/// mission.
pub fn write_visibility_ledger<W: Write>(
    records: &[VisibilityRecord],
    writer: W,
) -> Result<(), ReportError> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer.write_record(["building_id", "image_id", "shows_damage"])?;
    for record in records {
        csv_writer.write_record([
            record.building_id.as_str(),
            record.image_id.as_str(),
            if record.shows_damage { "true" } else { "false" },
        ])?;
    }
    csv_writer.flush()?;
    Ok(())
}

fn write_json<W: Write>(mut writer: W, value: &serde_json::Value) -> Result<(), ReportError> {
    serde_json::to_writer_pretty(&mut writer, value)?;
    writer.write_all(b"\n")?;
    Ok(())
}
