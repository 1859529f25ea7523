//! Confusion matrices, accuracy/ND-rate metrics, loss-parameter sweeps,
//! and fused-probability histograms.
//!
//! The matrix keeps the full bookkeeping of a survey run: decided calls,
//! abstentions, buildings that never passed the overview gate (or had no
//! evidence), and buildings whose ground truth is missing or outside the
//! binary vocabulary. Accuracy is reported both over decided buildings
//! and over all permissible ones, because the trade-off between the two
//! is exactly what the loss parameters tune.

use std::collections::BTreeMap;
use std::num::NonZeroUsize;

use thiserror::Error;

use crate::decision::LossTable;
use crate::evidence::BuildingCase;
use crate::fusion::CoverageModel;
use crate::pipeline::{run_post_event_stream, BuildingOutcome, Outcome, PipelineError};
use crate::task::{TaskId, TruthLabel};

/// Matrix row: the building's ground-truth bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TruthClass {
    NoLabel,
    Positive,
    Negative,
    Other,
}

impl TruthClass {
    /// Fixed row order used everywhere (reports, iteration).
    pub const ALL: [TruthClass; 4] = [
        TruthClass::NoLabel,
        TruthClass::Positive,
        TruthClass::Negative,
        TruthClass::Other,
    ];

    pub fn from_truth(label: Option<TruthLabel>) -> TruthClass {
        match label {
            Some(TruthLabel::Positive) => TruthClass::Positive,
            Some(TruthLabel::Negative) => TruthClass::Negative,
            Some(TruthLabel::Other) => TruthClass::Other,
            Some(TruthLabel::Unlabeled) | None => TruthClass::NoLabel,
        }
    }

    /// Rows that enter accuracy and ND-rate denominators.
    pub fn is_labeled(self) -> bool {
        matches!(self, TruthClass::Positive | TruthClass::Negative)
    }
}

/// Matrix column: the pipeline's disposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DecisionColumn {
    /// No overview image (post-event) or no scored image (pre-event).
    Unassessed,
    NoDecision,
    Positive,
    Negative,
}

impl DecisionColumn {
    /// Fixed column order used everywhere (reports, iteration).
    pub const ALL: [DecisionColumn; 4] = [
        DecisionColumn::Unassessed,
        DecisionColumn::NoDecision,
        DecisionColumn::Positive,
        DecisionColumn::Negative,
    ];

    pub fn from_outcome(outcome: Outcome) -> DecisionColumn {
        match outcome {
            Outcome::Positive => DecisionColumn::Positive,
            Outcome::Negative => DecisionColumn::Negative,
            Outcome::NoDecision => DecisionColumn::NoDecision,
            Outcome::NoOverview | Outcome::NoEvidence => DecisionColumn::Unassessed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{metric} denominator is zero")]
    EmptyDenominator { metric: &'static str },
    #[error("invalid sweep grid: {reason}")]
    InvalidGrid { reason: String },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Decision-versus-truth counts, including the abstention and
/// not-assessed buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    counts: [[u64; 4]; 4],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        ConfusionMatrix::default()
    }

    /// Builds a matrix from explicit cell counts; rows follow
    /// [`TruthClass::ALL`], columns follow [`DecisionColumn::ALL`].
    pub fn from_rows(rows: [[u64; 4]; 4]) -> Self {
        ConfusionMatrix { counts: rows }
    }

    pub fn increment(&mut self, row: TruthClass, column: DecisionColumn) {
        self.counts[row as usize][column as usize] += 1;
    }

    pub fn count(&self, row: TruthClass, column: DecisionColumn) -> u64 {
        self.counts[row as usize][column as usize]
    }

    pub fn row_total(&self, row: TruthClass) -> u64 {
        self.counts[row as usize].iter().sum()
    }

    pub fn column_total(&self, column: DecisionColumn) -> u64 {
        self.counts.iter().map(|r| r[column as usize]).sum()
    }

    pub fn grand_total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Correctly decided labeled buildings.
    pub fn correct(&self) -> u64 {
        self.count(TruthClass::Positive, DecisionColumn::Positive)
            + self.count(TruthClass::Negative, DecisionColumn::Negative)
    }

    /// Incorrectly decided labeled buildings.
    pub fn incorrect(&self) -> u64 {
        self.count(TruthClass::Positive, DecisionColumn::Negative)
            + self.count(TruthClass::Negative, DecisionColumn::Positive)
    }

    /// Abstentions among labeled buildings.
    pub fn no_decision_total(&self) -> u64 {
        self.count(TruthClass::Positive, DecisionColumn::NoDecision)
            + self.count(TruthClass::Negative, DecisionColumn::NoDecision)
    }

    /// Labeled buildings the pipeline could permissibly decide on:
    /// correct + incorrect + abstained (not-assessed buildings excluded).
    pub fn permissible(&self) -> u64 {
        self.correct() + self.incorrect() + self.no_decision_total()
    }

    pub fn accuracy(&self, mode: AccuracyMode) -> Result<f64, EvalError> {
        let denominator = match mode {
            AccuracyMode::OverDecided => self.correct() + self.incorrect(),
            AccuracyMode::OverPermissible => self.permissible(),
        };
        if denominator == 0 {
            return Err(EvalError::EmptyDenominator { metric: "accuracy" });
        }
        Ok(self.correct() as f64 / denominator as f64)
    }

    /// Abstention rate over all permissible predictions.
    pub fn nd_rate(&self) -> Result<f64, EvalError> {
        let permissible = self.permissible();
        if permissible == 0 {
            return Err(EvalError::EmptyDenominator { metric: "nd_rate" });
        }
        Ok(self.no_decision_total() as f64 / permissible as f64)
    }
}

/// Which denominator accuracy is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccuracyMode {
    /// correct / (correct + incorrect)
    OverDecided,
    /// correct / (correct + incorrect + abstained)
    OverPermissible,
}

/// Tallies outcomes for one task against the cases' ground truth.
///
/// Buildings whose outcome has no matching truth entry fall in the
/// no-label row. Every outcome lands in exactly one cell.
pub fn build_confusion(
    outcomes: &[BuildingOutcome],
    cases: &[BuildingCase],
    task: TaskId,
) -> ConfusionMatrix {
    let truth_by_building: BTreeMap<&str, TruthLabel> = cases
        .iter()
        .filter_map(|c| c.truth.get(&task).map(|&label| (c.building_id.as_str(), label)))
        .collect();
    let mut matrix = ConfusionMatrix::new();
    for outcome in outcomes.iter().filter(|o| o.task == task) {
        let row = TruthClass::from_truth(truth_by_building.get(outcome.building_id.as_str()).copied());
        let column = DecisionColumn::from_outcome(outcome.outcome);
        matrix.increment(row, column);
    }
    matrix
}

/// The (alpha1, alpha2) grid a sweep runs over.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub alpha1_values: Vec<f64>,
    pub alpha2_values: Vec<f64>,
}

impl SweepSpec {
    pub fn new(alpha1_values: Vec<f64>, alpha2_values: Vec<f64>) -> Result<Self, EvalError> {
        let spec = SweepSpec { alpha1_values, alpha2_values };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), EvalError> {
        for (name, values) in [("alpha1", &self.alpha1_values), ("alpha2", &self.alpha2_values)] {
            if values.is_empty() {
                return Err(EvalError::InvalidGrid { reason: format!("{name} grid is empty") });
            }
            for &v in values {
                if !(v > 0.0 && v <= 1.0) {
                    return Err(EvalError::InvalidGrid {
                        reason: format!("{name} value {v} is outside (0, 1]"),
                    });
                }
            }
            for pair in values.windows(2) {
                if pair[0] >= pair[1] {
                    return Err(EvalError::InvalidGrid {
                        reason: format!("{name} grid must be strictly ascending"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Metrics for one (alpha1, alpha2) cell. Metrics are `None` when their
/// denominator is empty for this dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub alpha1: f64,
    pub alpha2: f64,
    pub accuracy_over_decided: Option<f64>,
    pub accuracy_over_permissible: Option<f64>,
    pub nd_rate: Option<f64>,
}

/// Full sweep output; cells cover the Cartesian product of the grids in
/// row-major (alpha1 outer, alpha2 inner) order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub alpha1_values: Vec<f64>,
    pub alpha2_values: Vec<f64>,
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    pub fn cell(&self, alpha1: f64, alpha2: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.alpha1 == alpha1 && c.alpha2 == alpha2)
    }
}

/// Re-runs the post-event stream for every grid cell and records
/// accuracy (both modes) and ND rate against the damage truth.
pub fn sweep_loss_params(
    cases: &[BuildingCase],
    coverage: &CoverageModel,
    gate_threshold: f64,
    spec: &SweepSpec,
) -> Result<SweepGrid, EvalError> {
    spec.validate()?;
    let mut cells = Vec::with_capacity(spec.alpha1_values.len() * spec.alpha2_values.len());
    for &alpha1 in &spec.alpha1_values {
        for &alpha2 in &spec.alpha2_values {
            let loss = LossTable::new(alpha1, alpha2).expect("grid values are valid losses");
            let outcomes = run_post_event_stream(cases, coverage, &loss, gate_threshold)?;
            let matrix = build_confusion(&outcomes, cases, TaskId::Damage);
            cells.push(SweepCell {
                alpha1,
                alpha2,
                accuracy_over_decided: matrix.accuracy(AccuracyMode::OverDecided).ok(),
                accuracy_over_permissible: matrix.accuracy(AccuracyMode::OverPermissible).ok(),
                nd_rate: matrix.nd_rate().ok(),
            });
        }
    }
    Ok(SweepGrid {
        alpha1_values: spec.alpha1_values.clone(),
        alpha2_values: spec.alpha2_values.clone(),
        cells,
    })
}

/// Histograms of fused probabilities, one per (truth, decision) pair.
///
/// Only outcomes that carry a fused probability (decided or abstained)
/// contribute. Bins partition [0, 1] evenly; the top bin is closed so
/// p = 1 lands in it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityHistograms {
    bins: usize,
    counts: BTreeMap<(TruthClass, DecisionColumn), Vec<u64>>,
}

impl ProbabilityHistograms {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// The populated (truth, decision) pairs in stable order.
    pub fn pairs(&self) -> impl Iterator<Item = (TruthClass, DecisionColumn, &[u64])> {
        self.counts.iter().map(|(&(t, d), v)| (t, d, v.as_slice()))
    }

    pub fn counts_for(&self, truth: TruthClass, decision: DecisionColumn) -> Option<&[u64]> {
        self.counts.get(&(truth, decision)).map(Vec::as_slice)
    }

    /// The [lo, hi) range of bin `index` (the last bin is closed).
    pub fn bin_range(&self, index: usize) -> (f64, f64) {
        let width = 1.0 / self.bins as f64;
        (index as f64 * width, (index + 1) as f64 * width)
    }
}

/// Bins the fused probabilities of decided and abstained outcomes by
/// (truth, decision) pair.
pub fn probability_histogram(
    outcomes: &[BuildingOutcome],
    cases: &[BuildingCase],
    task: TaskId,
    bins: NonZeroUsize,
) -> ProbabilityHistograms {
    let bins = bins.get();
    let truth_by_building: BTreeMap<&str, TruthLabel> = cases
        .iter()
        .filter_map(|c| c.truth.get(&task).map(|&label| (c.building_id.as_str(), label)))
        .collect();
    let mut counts: BTreeMap<(TruthClass, DecisionColumn), Vec<u64>> = BTreeMap::new();
    for outcome in outcomes.iter().filter(|o| o.task == task) {
        let Some(p) = outcome.fused_p else { continue };
        let row = TruthClass::from_truth(truth_by_building.get(outcome.building_id.as_str()).copied());
        let column = DecisionColumn::from_outcome(outcome.outcome);
        let index = ((p * bins as f64) as usize).min(bins - 1);
        counts.entry((row, column)).or_insert_with(|| vec![0; bins])[index] += 1;
    }
    ProbabilityHistograms { bins, counts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::ImageEvidence;

    /// Post-event run summary published for the full-coverage setup:
    /// rows no-label/positive/negative, columns unassessed/ND/pos/neg.
    pub(crate) const POST_EVENT_FULL_COVERAGE_CELLS: [[u64; 4]; 4] = [
        [26, 6, 5, 17],
        [44, 16, 151, 39],
        [109, 71, 71, 566],
        [0, 0, 0, 0],
    ];

    #[test]
    fn published_full_coverage_totals() {
        let m = ConfusionMatrix::from_rows(POST_EVENT_FULL_COVERAGE_CELLS);
        assert_eq!(m.grand_total(), 1121);
        assert_eq!(m.correct(), 717);
        assert_eq!(m.incorrect(), 110);
        assert_eq!(m.no_decision_total(), 87);
        assert_eq!(m.permissible(), 914);
    }

    #[test]
    fn accuracy_modes_on_the_published_summary() {
        let m = ConfusionMatrix::from_rows(POST_EVENT_FULL_COVERAGE_CELLS);
        let decided = m.accuracy(AccuracyMode::OverDecided).unwrap();
        let permissible = m.accuracy(AccuracyMode::OverPermissible).unwrap();
        assert!((decided - 717.0 / 827.0).abs() <= 1e-12);
        assert!((permissible - 717.0 / 914.0).abs() <= 1e-12);
        assert!((m.nd_rate().unwrap() - 87.0 / 914.0).abs() <= 1e-12);
    }

    #[test]
    fn nd_rate_on_the_ramped_coverage_summary() {
        // Same population re-run with the ramping coverage schedule:
        // abstentions grow to 400 of the 914 permissible buildings.
        let m = ConfusionMatrix::from_rows([
            [26, 19, 5, 4],
            [44, 45, 151, 10],
            [109, 355, 71, 282],
            [0, 0, 0, 0],
        ]);
        assert_eq!(m.no_decision_total(), 400);
        assert_eq!(m.permissible(), 914);
        assert!((m.nd_rate().unwrap() - 400.0 / 914.0).abs() <= 1e-12);
    }

    #[test]
    fn perfect_matrix_has_unit_accuracy_and_zero_nd() {
        let mut m = ConfusionMatrix::new();
        for _ in 0..5 {
            m.increment(TruthClass::Positive, DecisionColumn::Positive);
            m.increment(TruthClass::Negative, DecisionColumn::Negative);
        }
        assert_eq!(m.accuracy(AccuracyMode::OverDecided).unwrap(), 1.0);
        assert_eq!(m.accuracy(AccuracyMode::OverPermissible).unwrap(), 1.0);
        assert_eq!(m.nd_rate().unwrap(), 0.0);
    }

    #[test]
    fn empty_matrix_metrics_error() {
        let m = ConfusionMatrix::new();
        assert_eq!(m.grand_total(), 0);
        assert!(matches!(
            m.accuracy(AccuracyMode::OverDecided),
            Err(EvalError::EmptyDenominator { .. })
        ));
        assert!(matches!(m.nd_rate(), Err(EvalError::EmptyDenominator { .. })));
    }

    #[test]
    fn marginals_are_cell_sums() {
        let m = ConfusionMatrix::from_rows(POST_EVENT_FULL_COVERAGE_CELLS);
        assert_eq!(m.row_total(TruthClass::NoLabel), 54);
        assert_eq!(m.row_total(TruthClass::Positive), 250);
        assert_eq!(m.row_total(TruthClass::Negative), 817);
        assert_eq!(m.column_total(DecisionColumn::Unassessed), 179);
        assert_eq!(m.column_total(DecisionColumn::NoDecision), 93);
        assert_eq!(m.column_total(DecisionColumn::Positive), 227);
        assert_eq!(m.column_total(DecisionColumn::Negative), 622);
        let row_sum: u64 = TruthClass::ALL.iter().map(|&r| m.row_total(r)).sum();
        let col_sum: u64 = DecisionColumn::ALL.iter().map(|&c| m.column_total(c)).sum();
        assert_eq!(row_sum, m.grand_total());
        assert_eq!(col_sum, m.grand_total());
    }

    fn sample_cases() -> Vec<BuildingCase> {
        use crate::task::TruthLabel;
        vec![
            // Damaged building, clearly detected.
            BuildingCase::new("b1")
                .with_truth(TaskId::Damage, TruthLabel::Positive)
                .with_image(
                    ImageEvidence::new("b1", "i1")
                        .with_score(TaskId::Overview, 0.9)
                        .with_score(TaskId::Damage, 0.95),
                ),
            // Undamaged building, ambiguous evidence.
            BuildingCase::new("b2")
                .with_truth(TaskId::Damage, TruthLabel::Negative)
                .with_image(
                    ImageEvidence::new("b2", "i1")
                        .with_score(TaskId::Overview, 0.8)
                        .with_score(TaskId::Damage, 0.5),
                ),
            // No overview images at all.
            BuildingCase::new("b3")
                .with_truth(TaskId::Damage, TruthLabel::Negative)
                .with_image(ImageEvidence::new("b3", "i1").with_score(TaskId::Overview, 0.1)),
            // Truth missing entirely.
            BuildingCase::new("b4").with_image(
                ImageEvidence::new("b4", "i1")
                    .with_score(TaskId::Overview, 0.9)
                    .with_score(TaskId::Damage, 0.05),
            ),
        ]
    }

    #[test]
    fn build_confusion_places_every_outcome_once() {
        let cases = sample_cases();
        let loss = LossTable::symmetric(0.3).unwrap();
        let outcomes =
            run_post_event_stream(&cases, &CoverageModel::full_coverage(), &loss, 0.5).unwrap();
        let m = build_confusion(&outcomes, &cases, TaskId::Damage);
        assert_eq!(m.grand_total(), 4);
        assert_eq!(m.count(TruthClass::Positive, DecisionColumn::Positive), 1);
        assert_eq!(m.count(TruthClass::Negative, DecisionColumn::NoDecision), 1);
        assert_eq!(m.count(TruthClass::Negative, DecisionColumn::Unassessed), 1);
        assert_eq!(m.count(TruthClass::NoLabel, DecisionColumn::Negative), 1);
    }

    #[test]
    fn empty_outcomes_make_an_all_zero_matrix() {
        let m = build_confusion(&[], &[], TaskId::Damage);
        assert_eq!(m, ConfusionMatrix::new());
    }

    #[test]
    fn single_cell_sweep_matches_a_direct_run() {
        let cases = sample_cases();
        let coverage = CoverageModel::full_coverage();
        let spec = SweepSpec::new(vec![0.3], vec![0.3]).unwrap();
        let grid = sweep_loss_params(&cases, &coverage, 0.5, &spec).unwrap();
        assert_eq!(grid.cells.len(), 1);

        let loss = LossTable::symmetric(0.3).unwrap();
        let outcomes = run_post_event_stream(&cases, &coverage, &loss, 0.5).unwrap();
        let m = build_confusion(&outcomes, &cases, TaskId::Damage);
        let cell = &grid.cells[0];
        assert_eq!(cell.accuracy_over_decided, m.accuracy(AccuracyMode::OverDecided).ok());
        assert_eq!(
            cell.accuracy_over_permissible,
            m.accuracy(AccuracyMode::OverPermissible).ok()
        );
        assert_eq!(cell.nd_rate, m.nd_rate().ok());
    }

    #[test]
    fn sweep_grids_are_validated() {
        assert!(matches!(
            SweepSpec::new(vec![], vec![0.3]),
            Err(EvalError::InvalidGrid { .. })
        ));
        assert!(matches!(
            SweepSpec::new(vec![0.0], vec![0.3]),
            Err(EvalError::InvalidGrid { .. })
        ));
        assert!(matches!(
            SweepSpec::new(vec![0.3, 0.2], vec![0.3]),
            Err(EvalError::InvalidGrid { .. })
        ));
        assert!(SweepSpec::new(vec![0.1, 0.5, 1.0], vec![0.3]).is_ok());
    }

    #[test]
    fn histogram_bin_placement() {
        let outcomes = vec![BuildingOutcome {
            building_id: "b1".into(),
            task: TaskId::Damage,
            outcome: Outcome::Positive,
            fused_p: Some(0.94),
            n_images_used: 1,
        }];
        let cases = vec![BuildingCase::new("b1").with_truth(TaskId::Damage, TruthLabel::Positive)];
        let h = probability_histogram(
            &outcomes,
            &cases,
            TaskId::Damage,
            NonZeroUsize::new(10).unwrap(),
        );
        let counts = h.counts_for(TruthClass::Positive, DecisionColumn::Positive).unwrap();
        assert_eq!(counts[9], 1);
        assert_eq!(counts.iter().sum::<u64>(), 1);
        assert_eq!(h.bin_range(9), (0.9, 1.0));
    }

    #[test]
    fn histogram_accumulates_same_pair() {
        let outcome = |id: &str| BuildingOutcome {
            building_id: id.into(),
            task: TaskId::Damage,
            outcome: Outcome::NoDecision,
            fused_p: Some(0.28),
            n_images_used: 2,
        };
        let cases = vec![
            BuildingCase::new("b1").with_truth(TaskId::Damage, TruthLabel::Negative),
            BuildingCase::new("b2").with_truth(TaskId::Damage, TruthLabel::Negative),
        ];
        let outcomes = vec![outcome("b1"), outcome("b2")];
        let h = probability_histogram(
            &outcomes,
            &cases,
            TaskId::Damage,
            NonZeroUsize::new(10).unwrap(),
        );
        let counts = h.counts_for(TruthClass::Negative, DecisionColumn::NoDecision).unwrap();
        assert_eq!(counts[2], 2);
    }

    #[test]
    fn histogram_of_nothing_is_empty() {
        let h = probability_histogram(&[], &[], TaskId::Damage, NonZeroUsize::new(10).unwrap());
        assert!(h.is_empty());
        assert_eq!(h.pairs().count(), 0);
    }

    #[test]
    fn histogram_ignores_unassessed_outcomes() {
        let outcomes = vec![BuildingOutcome {
            building_id: "b1".into(),
            task: TaskId::Damage,
            outcome: Outcome::NoOverview,
            fused_p: None,
            n_images_used: 0,
        }];
        let h = probability_histogram(&outcomes, &[], TaskId::Damage, NonZeroUsize::new(5).unwrap());
        assert!(h.is_empty());
    }
}
