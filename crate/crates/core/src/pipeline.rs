//! The two analysis streams, run end to end per building.
//!
//! Post-event: overview gate, coverage-weighted damage fusion, decision.
//! Pre-event: per-attribute score averaging, decision. The streams are
//! independent by construction; each (building, task) pair yields exactly
//! one outcome, and outputs are stably ordered by (building_id, task).

use thiserror::Error;

use crate::decision::{DecisionValue, LossTable};
use crate::evidence::{apply_overview_gate, validate_case, BuildingCase, GateOutcome, Violation};
use crate::fusion::{fuse_post_event, fuse_pre_event, CoverageModel, FusionError, FusionResult};
use crate::task::TaskId;

/// Final disposition of one (building, task) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Positive,
    Negative,
    NoDecision,
    /// Post-event only: no image passed the overview gate.
    NoOverview,
    /// No image carried a score for the task.
    NoEvidence,
}

impl Outcome {
    pub fn from_decision(value: DecisionValue) -> Outcome {
        match value {
            DecisionValue::Positive => Outcome::Positive,
            DecisionValue::Negative => Outcome::Negative,
            DecisionValue::NoDecision => Outcome::NoDecision,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Outcome::Positive => "positive",
            Outcome::Negative => "negative",
            Outcome::NoDecision => "no_decision",
            Outcome::NoOverview => "no_overview",
            Outcome::NoEvidence => "no_evidence",
        }
    }

    pub fn parse(s: &str) -> Option<Outcome> {
        [
            Outcome::Positive,
            Outcome::Negative,
            Outcome::NoDecision,
            Outcome::NoOverview,
            Outcome::NoEvidence,
        ]
        .into_iter()
        .find(|o| o.name() == s)
    }

    /// Whether a fused probability accompanies this outcome.
    pub fn is_decided_or_nd(self) -> bool {
        matches!(self, Outcome::Positive | Outcome::Negative | Outcome::NoDecision)
    }
}

/// One row of pipeline output.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingOutcome {
    pub building_id: String,
    pub task: TaskId,
    pub outcome: Outcome,
    /// Present iff the outcome is positive, negative, or no_decision.
    pub fused_p: Option<f64>,
    /// Number of images whose scores entered the fusion.
    pub n_images_used: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("case {building_id} is invalid: {}", format_violations(.violations))]
    InvalidCase {
        building_id: String,
        violations: Vec<Violation>,
    },
    #[error(transparent)]
    Fusion(#[from] FusionError),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Per-task loss tables for the pre-event attributes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreEventLosses {
    pub elevation: LossTable,
    pub stories: LossTable,
    pub material: LossTable,
}

impl PreEventLosses {
    /// The same table for every attribute.
    pub fn uniform(loss: LossTable) -> Self {
        PreEventLosses { elevation: loss, stories: loss, material: loss }
    }

    pub fn for_task(&self, task: TaskId) -> Option<LossTable> {
        match task {
            TaskId::Elevation => Some(self.elevation),
            TaskId::Stories => Some(self.stories),
            TaskId::Material => Some(self.material),
            _ => None,
        }
    }
}

fn check_cases(cases: &[BuildingCase]) -> Result<(), PipelineError> {
    for case in cases {
        let violations = validate_case(case);
        if !violations.is_empty() {
            return Err(PipelineError::InvalidCase {
                building_id: case.building_id.clone(),
                violations,
            });
        }
    }
    Ok(())
}

/// Runs the post-event stream: gate on overview scores, fuse the damage
/// scores of surviving images under the coverage model, and decide.
///
/// Buildings where nothing passes the gate yield [`Outcome::NoOverview`];
/// buildings whose gated images carry no damage score yield
/// [`Outcome::NoEvidence`].
pub fn run_post_event_stream(
    cases: &[BuildingCase],
    coverage: &CoverageModel,
    loss: &LossTable,
    gate_threshold: f64,
) -> Result<Vec<BuildingOutcome>, PipelineError> {
    check_cases(cases)?;
    let mut outcomes = Vec::with_capacity(cases.len());
    for case in cases {
        let (gated, gate) = apply_overview_gate(case, gate_threshold);
        let outcome = match gate {
            GateOutcome::NoOverview => BuildingOutcome {
                building_id: case.building_id.clone(),
                task: TaskId::Damage,
                outcome: Outcome::NoOverview,
                fused_p: None,
                n_images_used: 0,
            },
            GateOutcome::HasOverview => {
                let scores = gated.scores_for(TaskId::Damage);
                if scores.is_empty() {
                    BuildingOutcome {
                        building_id: case.building_id.clone(),
                        task: TaskId::Damage,
                        outcome: Outcome::NoEvidence,
                        fused_p: None,
                        n_images_used: 0,
                    }
                } else {
                    let fused = FusionResult {
                        building_id: case.building_id.clone(),
                        task_id: TaskId::Damage,
                        n_images: scores.len(),
                        p_positive: fuse_post_event(&scores, coverage)?,
                    };
                    let decision = loss
                        .decide(fused.p_positive)
                        .expect("fused probability is in range");
                    BuildingOutcome {
                        building_id: fused.building_id,
                        task: fused.task_id,
                        outcome: Outcome::from_decision(decision.value),
                        fused_p: Some(fused.p_positive),
                        n_images_used: fused.n_images,
                    }
                }
            }
        };
        outcomes.push(outcome);
    }
    outcomes.sort_by(|a, b| (&a.building_id, a.task).cmp(&(&b.building_id, b.task)));
    Ok(outcomes)
}

/// Runs the pre-event stream: for each attribute task, average the
/// scores of images carrying that task and decide. No gate and no
/// coverage model apply; buildings with zero scored images for a task
/// yield [`Outcome::NoEvidence`] for it.
pub fn run_pre_event_stream(
    cases: &[BuildingCase],
    losses: &PreEventLosses,
) -> Result<Vec<BuildingOutcome>, PipelineError> {
    check_cases(cases)?;
    let mut outcomes = Vec::with_capacity(cases.len() * TaskId::PRE_EVENT.len());
    for case in cases {
        for task in TaskId::PRE_EVENT {
            let scores = case.scores_for(task);
            let outcome = if scores.is_empty() {
                BuildingOutcome {
                    building_id: case.building_id.clone(),
                    task,
                    outcome: Outcome::NoEvidence,
                    fused_p: None,
                    n_images_used: 0,
                }
            } else {
                let p = fuse_pre_event(&scores)?;
                let loss = losses.for_task(task).expect("pre-event task");
                let decision = loss.decide(p).expect("fused probability is in range");
                BuildingOutcome {
                    building_id: case.building_id.clone(),
                    task,
                    outcome: Outcome::from_decision(decision.value),
                    fused_p: Some(p),
                    n_images_used: scores.len(),
                }
            };
            outcomes.push(outcome);
        }
    }
    outcomes.sort_by(|a, b| (&a.building_id, a.task).cmp(&(&b.building_id, b.task)));
    Ok(outcomes)
}
