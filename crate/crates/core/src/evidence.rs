//! Per-image evidence and building-level case records.
//!
//! An [`ImageEvidence`] holds the positive-class probabilities one image
//! received from the task classifiers; a [`BuildingCase`] groups all the
//! evidence for one building together with its ground-truth labels.
//! Missing scores are genuinely absent (never encoded as zero), so a
//! task's fusion only ever sees images that were actually scored for it.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::task::{TaskId, TruthLabel};

/// One image's positive-class probabilities, keyed by task.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEvidence {
    pub image_id: String,
    pub building_id: String,
    pub scores: BTreeMap<TaskId, f64>,
}

impl ImageEvidence {
    pub fn new(building_id: impl Into<String>, image_id: impl Into<String>) -> Self {
        ImageEvidence {
            image_id: image_id.into(),
            building_id: building_id.into(),
            scores: BTreeMap::new(),
        }
    }

    /// Builder-style score insertion; later writes to the same task win.
    pub fn with_score(mut self, task: TaskId, p_positive: f64) -> Self {
        self.scores.insert(task, p_positive);
        self
    }

    pub fn score(&self, task: TaskId) -> Option<f64> {
        self.scores.get(&task).copied()
    }
}

/// A building's identifier, evidence set, and ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingCase {
    pub building_id: String,
    pub images: Vec<ImageEvidence>,
    pub truth: BTreeMap<TaskId, TruthLabel>,
}

impl BuildingCase {
    pub fn new(building_id: impl Into<String>) -> Self {
        BuildingCase {
            building_id: building_id.into(),
            images: Vec::new(),
            truth: BTreeMap::new(),
        }
    }

    pub fn with_image(mut self, image: ImageEvidence) -> Self {
        self.images.push(image);
        self
    }

    pub fn with_truth(mut self, task: TaskId, label: TruthLabel) -> Self {
        self.truth.insert(task, label);
        self
    }

    /// Scores this case's images carry for `task`, in image order.
    pub fn scores_for(&self, task: TaskId) -> Vec<f64> {
        self.images.iter().filter_map(|img| img.score(task)).collect()
    }
}

/// A single ground-truth assertion, as joined during grouping.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthEntry {
    pub building_id: String,
    pub task: TaskId,
    pub label: TruthLabel,
}

/// One invariant violation found by [`validate_case`].
///
/// Violations are data, not failures: a report simply lists everything
/// wrong with a case so the caller can decide what to do with it.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ScoreOutOfRange {
        image_id: String,
        task: TaskId,
        value: f64,
    },
    DuplicateImageId {
        image_id: String,
    },
    ForeignBuildingId {
        image_id: String,
        building_id: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ScoreOutOfRange { image_id, task, value } => {
                write!(f, "image {image_id}: {task} score out of range ({value})")
            }
            Violation::DuplicateImageId { image_id } => {
                write!(f, "duplicate image {image_id}")
            }
            Violation::ForeignBuildingId { image_id, building_id } => {
                write!(f, "image {image_id} references foreign building {building_id}")
            }
        }
    }
}

/// Checks a case against the type invariants and reports every violation.
///
/// Returns an empty list iff all scores lie in [0, 1], image ids are
/// unique within the case, and every image references the case's
/// building.
pub fn validate_case(case: &BuildingCase) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for image in &case.images {
        if image.building_id != case.building_id {
            violations.push(Violation::ForeignBuildingId {
                image_id: image.image_id.clone(),
                building_id: image.building_id.clone(),
            });
        }
        if !seen.insert(image.image_id.as_str()) {
            violations.push(Violation::DuplicateImageId {
                image_id: image.image_id.clone(),
            });
        }
        for (&task, &value) in &image.scores {
            if !(0.0..=1.0).contains(&value) || value.is_nan() {
                violations.push(Violation::ScoreOutOfRange {
                    image_id: image.image_id.clone(),
                    task,
                    value,
                });
            }
        }
    }
    violations
}

/// Grouping failure: the truth stream contradicts itself.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroupError {
    #[error("conflicting truth labels for building {building_id}, task {task}")]
    ConflictingTruth { building_id: String, task: TaskId },
}

/// Groups per-image evidence rows and truth rows into one case per building.
///
/// Evidence rows sharing a (building_id, image_id) key are merged with
/// last-write-wins per task, which keeps re-grouping of streamed or
/// re-exported data deterministic. Buildings that only appear in the
/// truth stream still yield a case with an empty image list.
pub fn group_evidence<E, T>(evidence: E, truths: T) -> Result<Vec<BuildingCase>, GroupError>
where
    E: IntoIterator<Item = ImageEvidence>,
    T: IntoIterator<Item = TruthEntry>,
{
    // building -> (image order, image_id -> index)
    let mut buildings: BTreeMap<String, Vec<ImageEvidence>> = BTreeMap::new();
    let mut index: BTreeMap<(String, String), usize> = BTreeMap::new();

    for row in evidence {
        let key = (row.building_id.clone(), row.image_id.clone());
        match index.get(&key) {
            Some(&i) => {
                let images = buildings.get_mut(&row.building_id).expect("indexed building");
                for (task, value) in row.scores {
                    images[i].scores.insert(task, value);
                }
            }
            None => {
                let images = buildings.entry(row.building_id.clone()).or_default();
                index.insert(key, images.len());
                images.push(row);
            }
        }
    }

    let mut truth_maps: BTreeMap<String, BTreeMap<TaskId, TruthLabel>> = BTreeMap::new();
    for entry in truths {
        let map = truth_maps.entry(entry.building_id.clone()).or_default();
        match map.insert(entry.task, entry.label) {
            Some(previous) if previous != entry.label => {
                return Err(GroupError::ConflictingTruth {
                    building_id: entry.building_id,
                    task: entry.task,
                });
            }
            _ => {}
        }
        buildings.entry(entry.building_id).or_default();
    }

    Ok(buildings
        .into_iter()
        .map(|(building_id, images)| BuildingCase {
            truth: truth_maps.remove(&building_id).unwrap_or_default(),
            building_id,
            images,
        })
        .collect())
}

/// Flattens cases back into evidence and truth rows (inverse of grouping).
pub fn flatten_cases(cases: &[BuildingCase]) -> (Vec<ImageEvidence>, Vec<TruthEntry>) {
    let mut evidence = Vec::new();
    let mut truths = Vec::new();
    for case in cases {
        evidence.extend(case.images.iter().cloned());
        for (&task, &label) in &case.truth {
            truths.push(TruthEntry {
                building_id: case.building_id.clone(),
                task,
                label,
            });
        }
    }
    (evidence, truths)
}

/// Whether the overview gate found any usable image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateOutcome {
    HasOverview,
    NoOverview,
}

/// Keeps exactly the images whose overview score reaches `threshold`.
///
/// Images without an overview score are dropped; the outcome is
/// [`GateOutcome::NoOverview`] iff nothing survives. Image ordering is
/// preserved. `threshold` must lie in [0, 1].
pub fn apply_overview_gate(case: &BuildingCase, threshold: f64) -> (BuildingCase, GateOutcome) {
    debug_assert!((0.0..=1.0).contains(&threshold), "gate threshold out of range");
    let kept: Vec<ImageEvidence> = case
        .images
        .iter()
        .filter(|img| img.score(TaskId::Overview).is_some_and(|p| p >= threshold))
        .cloned()
        .collect();
    let outcome = if kept.is_empty() {
        GateOutcome::NoOverview
    } else {
        GateOutcome::HasOverview
    };
    (
        BuildingCase {
            building_id: case.building_id.clone(),
            images: kept,
            truth: case.truth.clone(),
        },
        outcome,
    )
}
