//! Line-delimited evidence and truth records.
//!
//! Evidence rows are `building_id,image_id,task,p_positive`; truth rows
//! are `building_id,task,label`, each with a header line. Every
//! diagnostic names the offending line; nothing is coerced silently.

use std::io::{Read, Write};

use thiserror::Error;

use crate::evidence::{group_evidence, BuildingCase, GroupError, ImageEvidence, TruthEntry};
use crate::task::{TaskId, TruthLabel};

use super::format_probability;

pub(crate) const EVIDENCE_HEADER: [&str; 4] = ["building_id", "image_id", "task", "p_positive"];
pub(crate) const TRUTH_HEADER: [&str; 3] = ["building_id", "task", "label"];

/// One per-image, per-task score as it appears on the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceRecord {
    pub building_id: String,
    pub image_id: String,
    pub task: TaskId,
    pub p_positive: f64,
}

impl EvidenceRecord {
    /// The single-entry image evidence this record asserts.
    pub fn to_image_evidence(&self) -> ImageEvidence {
        ImageEvidence::new(&self.building_id, &self.image_id)
            .with_score(self.task, self.p_positive)
    }
}

/// One ground-truth assertion as it appears on the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRecord {
    pub building_id: String,
    pub task: TaskId,
    pub label: TruthLabel,
}

impl TruthRecord {
    pub fn to_entry(&self) -> TruthEntry {
        TruthEntry {
            building_id: self.building_id.clone(),
            task: self.task,
            label: self.label,
        }
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {reason}")]
    Record { line: u64, reason: String },
    #[error("header mismatch: expected {expected:?}")]
    Header { expected: &'static [&'static str] },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Group(#[from] GroupError),
}

fn record_error(line: u64, reason: impl Into<String>) -> ParseError {
    ParseError::Record { line, reason: reason.into() }
}

fn check_header(
    record: &csv::StringRecord,
    expected: &'static [&'static str],
) -> Result<(), ParseError> {
    if record.is_empty() || record.iter().eq(expected.iter().copied()) {
        Ok(())
    } else {
        Err(ParseError::Header { expected })
    }
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_probability(raw: &str, line: u64) -> Result<f64, ParseError> {
    let value: f64 = raw
        .trim()
        .parse()
        .map_err(|_| record_error(line, format!("cannot parse probability {raw:?}")))?;
    if !(0.0..=1.0).contains(&value) || value.is_nan() {
        return Err(record_error(line, format!("probability out of range ({raw})")));
    }
    Ok(value)
}

fn parse_task(raw: &str, line: u64) -> Result<TaskId, ParseError> {
    TaskId::parse(raw).ok_or_else(|| record_error(line, format!("unknown task {raw:?}")))
}

fn require_nonempty(raw: &str, field: &str, line: u64) -> Result<String, ParseError> {
    if raw.is_empty() {
        Err(record_error(line, format!("empty {field}")))
    } else {
        Ok(raw.to_string())
    }
}

/// Parses evidence records; one record per non-empty line after the header.
pub fn parse_evidence<R: Read>(reader: R) -> Result<Vec<EvidenceRecord>, ParseError> {
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    check_header(csv_reader.headers()?, &EVIDENCE_HEADER)?;
    let mut records = Vec::new();
    for row in csv_reader.records() {
        let row = row?;
        let line = line_of(&row);
        if row.len() != EVIDENCE_HEADER.len() {
            return Err(record_error(
                line,
                format!("expected {} fields, found {}", EVIDENCE_HEADER.len(), row.len()),
            ));
        }
        records.push(EvidenceRecord {
            building_id: require_nonempty(&row[0], "building_id", line)?,
            image_id: require_nonempty(&row[1], "image_id", line)?,
            task: parse_task(&row[2], line)?,
            p_positive: parse_probability(&row[3], line)?,
        });
    }
    Ok(records)
}

/// Parses truth records, validating each label against its task's vocabulary.
pub fn parse_truths<R: Read>(reader: R) -> Result<Vec<TruthRecord>, ParseError> {
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    check_header(csv_reader.headers()?, &TRUTH_HEADER)?;
    let mut records = Vec::new();
    for row in csv_reader.records() {
        let row = row?;
        let line = line_of(&row);
        if row.len() != TRUTH_HEADER.len() {
            return Err(record_error(
                line,
                format!("expected {} fields, found {}", TRUTH_HEADER.len(), row.len()),
            ));
        }
        let task = parse_task(&row[1], line)?;
        let label = TruthLabel::parse(task, &row[2]).ok_or_else(|| {
            record_error(line, format!("label {:?} not in task {task} vocabulary", &row[2]))
        })?;
        records.push(TruthRecord {
            building_id: require_nonempty(&row[0], "building_id", line)?,
            task,
            label,
        });
    }
    Ok(records)
}

/// Emits evidence records with the header line and fixed 6-decimal scores.
pub fn emit_evidence<W: Write>(records: &[EvidenceRecord], writer: W) -> Result<(), csv::Error> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer.write_record(EVIDENCE_HEADER)?;
    for record in records {
        csv_writer.write_record([
            record.building_id.as_str(),
            record.image_id.as_str(),
            record.task.name(),
            &format_probability(record.p_positive),
        ])?;
    }
    csv_writer.flush()?;
    Ok(())
}

/// Emits truth records with the header line.
pub fn emit_truths<W: Write>(records: &[TruthRecord], writer: W) -> Result<(), csv::Error> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer.write_record(TRUTH_HEADER)?;
    for record in records {
        csv_writer.write_record([
            record.building_id.as_str(),
            record.task.name(),
            record.label.render(record.task),
        ])?;
    }
    csv_writer.flush()?;
    Ok(())
}

/// Groups wire records into building cases.
pub fn records_to_cases(
    evidence: &[EvidenceRecord],
    truths: &[TruthRecord],
) -> Result<Vec<BuildingCase>, GroupError> {
    group_evidence(
        evidence.iter().map(EvidenceRecord::to_image_evidence),
        truths.iter().map(TruthRecord::to_entry),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_simple_file() {
        let input = "building_id,image_id,task,p_positive\nb1,i1,damage,0.94\n";
        let records = parse_evidence(input.as_bytes()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].task, TaskId::Damage);
        assert_eq!(records[0].p_positive, 0.94);
    }

    #[test]
    fn out_of_range_probability_names_the_line() {
        let input = "building_id,image_id,task,p_positive\nb1,i1,damage,0.5\nb1,i2,damage,1.2\n";
        let err = parse_evidence(input.as_bytes()).unwrap_err();
        match err {
            ParseError::Record { line, reason } => {
                assert_eq!(line, 3);
                assert!(reason.contains("out of range"), "{reason}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_empty_list() {
        assert!(parse_evidence(&b""[..]).unwrap().is_empty());
        assert!(parse_truths(&b""[..]).unwrap().is_empty());
        let header_only = "building_id,image_id,task,p_positive\n";
        assert!(parse_evidence(header_only.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn bad_header_is_rejected() {
        let input = "b1,i1,damage,0.5\n";
        assert!(matches!(
            parse_evidence(input.as_bytes()),
            Err(ParseError::Header { .. })
        ));
    }

    #[test]
    fn unknown_task_and_bad_label_are_rejected() {
        let input = "building_id,image_id,task,p_positive\nb1,i1,roof,0.5\n";
        let err = parse_evidence(input.as_bytes()).unwrap_err();
        assert!(matches!(err, ParseError::Record { line: 2, .. }));

        let input = "building_id,task,label\nb1,damage,EL\n";
        let err = parse_truths(input.as_bytes()).unwrap_err();
        match err {
            ParseError::Record { line, reason } => {
                assert_eq!(line, 2);
                assert!(reason.contains("vocabulary"), "{reason}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn truth_labels_parse_per_task() {
        let input = "building_id,task,label\nb1,damage,MD\nb2,stories,1S\nb3,material,other\n";
        let records = parse_truths(input.as_bytes()).unwrap();
        assert_eq!(records[0].label, TruthLabel::Positive);
        assert_eq!(records[1].label, TruthLabel::Negative);
        assert_eq!(records[2].label, TruthLabel::Other);
    }

    #[test]
    fn emit_is_deterministic_and_parses_back() {
        let records = vec![
            EvidenceRecord {
                building_id: "b1".into(),
                image_id: "i1".into(),
                task: TaskId::Damage,
                p_positive: 0.94,
            },
            EvidenceRecord {
                building_id: "b2".into(),
                image_id: "i1".into(),
                task: TaskId::Elevation,
                p_positive: 0.125,
            },
        ];
        let mut a = Vec::new();
        emit_evidence(&records, &mut a).unwrap();
        let mut b = Vec::new();
        emit_evidence(&records, &mut b).unwrap();
        assert_eq!(a, b);
        assert_eq!(parse_evidence(a.as_slice()).unwrap(), records);
    }

    #[test]
    fn grouping_wire_records_builds_cases() {
        let evidence = parse_evidence(
            "building_id,image_id,task,p_positive\nb1,i1,overview,0.9\nb1,i1,damage,0.8\nb2,i1,damage,0.3\n"
                .as_bytes(),
        )
        .unwrap();
        let truths =
            parse_truths("building_id,task,label\nb1,damage,MD\n".as_bytes()).unwrap();
        let cases = records_to_cases(&evidence, &truths).unwrap();
        assert_eq!(cases.len(), 2);
        assert_eq!(cases[0].images.len(), 1);
        assert_eq!(cases[0].images[0].score(TaskId::Overview), Some(0.9));
        assert_eq!(cases[0].images[0].score(TaskId::Damage), Some(0.8));
        assert_eq!(cases[0].truth.get(&TaskId::Damage), Some(&TruthLabel::Positive));
    }
}
