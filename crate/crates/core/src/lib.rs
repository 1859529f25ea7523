//! Building-level decision fusion for reconnaissance imagery.
//!
//! Per-image binary classifier scores rarely settle what happened to a
//! whole building: damage may be visible in only one photo, and a small
//! set of photos may not show every side. This crate fuses a building's
//! per-image positive-class probabilities into one building-level
//! probability and runs it through an expected-loss decision rule with a
//! No-Decision reject option.
//!
//! - [`evidence`]: per-image scores, building cases, validation, and the
//!   overview gate.
//! - [`fusion`]: exact enumeration over label vectors plus the averaging
//!   and coverage-weighted closed forms.
//! - [`decision`]: the loss table, argmin decision, and reject region.
//! - [`pipeline`]: the post-event and pre-event streams end to end.
//! - [`evaluation`]: confusion matrices, accuracy/ND-rate, loss sweeps,
//!   probability histograms.
//! - [`synth`]: seeded synthetic missions with known truth and
//!   controllable collector bias.
//! - [`io`]: line-delimited record formats and deterministic reports.
//!
//! All domain operations are pure functions over immutable inputs;
//! buildings and sweep cells can be processed in parallel with no
//! coordination.

pub mod decision;
pub mod evaluation;
pub mod evidence;
pub mod fusion;
pub mod io;
pub mod pipeline;
pub mod synth;
pub mod task;

pub use decision::{Decision, DecisionValue, LossTable, RejectRegion};
pub use evaluation::{
    build_confusion, probability_histogram, sweep_loss_params, AccuracyMode, ConfusionMatrix,
    DecisionColumn, SweepGrid, SweepSpec, TruthClass,
};
pub use evidence::{
    apply_overview_gate, group_evidence, validate_case, BuildingCase, GateOutcome, ImageEvidence,
    TruthEntry,
};
pub use fusion::{
    fuse_by_enumeration, fuse_post_event, fuse_pre_event, CoverageModel, FusionResult, FusionRule,
    ProbabilitySequence,
};
pub use pipeline::{
    run_post_event_stream, run_pre_event_stream, BuildingOutcome, Outcome, PreEventLosses,
};
pub use synth::{bias_report, generate_mission, Mission, SynthConfig};
pub use task::{Stream, TaskId, TaskSchema, TruthLabel};
