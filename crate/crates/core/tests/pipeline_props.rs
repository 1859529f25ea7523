//! Property suite for grouping, gating, and the two streams: stream
//! independence, one outcome per (building, task), determinism, and gate
//! monotonicity over randomized missions.

use proptest::prelude::*;

use recon_fusion::decision::LossTable;
use recon_fusion::evidence::{
    apply_overview_gate, flatten_cases, group_evidence, validate_case, BuildingCase,
    ImageEvidence, TruthEntry,
};
use recon_fusion::fusion::CoverageModel;
use recon_fusion::pipeline::{run_post_event_stream, run_pre_event_stream, PreEventLosses};
use recon_fusion::task::{TaskId, TruthLabel};

fn image_strategy(building: usize, image: usize) -> impl Strategy<Value = ImageEvidence> {
    // Each task score is independently present or absent.
    let score =
        prop::option::of(0.0f64..=1.0);
    (score.clone(), score.clone(), score.clone(), score.clone(), score).prop_map(
        move |(ov, dmg, el, st, ma)| {
            let mut evidence =
                ImageEvidence::new(format!("b{building:03}"), format!("b{building:03}-i{image:02}"));
            for (task, value) in [
                (TaskId::Overview, ov),
                (TaskId::Damage, dmg),
                (TaskId::Elevation, el),
                (TaskId::Stories, st),
                (TaskId::Material, ma),
            ] {
                if let Some(p) = value {
                    evidence = evidence.with_score(task, p);
                }
            }
            evidence
        },
    )
}

fn case_strategy(building: usize) -> impl Strategy<Value = BuildingCase> {
    (0usize..=4).prop_flat_map(move |n_images| {
        let images: Vec<_> = (0..n_images).map(|i| image_strategy(building, i)).collect();
        (images, prop::option::of(prop::sample::select(vec![
            TruthLabel::Positive,
            TruthLabel::Negative,
            TruthLabel::Unlabeled,
            TruthLabel::Other,
        ])))
            .prop_map(move |(images, damage_truth)| {
                let mut case = BuildingCase::new(format!("b{building:03}"));
                for image in images {
                    case = case.with_image(image);
                }
                if let Some(label) = damage_truth {
                    case = case.with_truth(TaskId::Damage, label);
                }
                case
            })
    })
}

fn mission_strategy() -> impl Strategy<Value = Vec<BuildingCase>> {
    (1usize..=8).prop_flat_map(|n| (0..n).map(case_strategy).collect::<Vec<_>>())
}

/// Replaces every post-event score (overview and damage) with fresh values.
fn perturb_post_event_scores(cases: &[BuildingCase], shift: f64) -> Vec<BuildingCase> {
    cases
        .iter()
        .map(|case| {
            let mut out = BuildingCase::new(&case.building_id);
            out.truth = case.truth.clone();
            for image in &case.images {
                let mut copy = image.clone();
                for task in [TaskId::Overview, TaskId::Damage] {
                    if let Some(p) = copy.scores.get(&task).copied() {
                        copy.scores.insert(task, (p + shift).min(1.0));
                    }
                }
                out.images.push(copy);
            }
            out
        })
        .collect()
}

proptest! {
    #[test]
    fn pre_event_outcomes_ignore_post_event_scores(
        cases in mission_strategy(),
        shift in 0.0f64..=1.0,
    ) {
        let losses = PreEventLosses::uniform(LossTable::symmetric(0.3).unwrap());
        let baseline = run_pre_event_stream(&cases, &losses).unwrap();
        let perturbed_cases = perturb_post_event_scores(&cases, shift);
        let perturbed = run_pre_event_stream(&perturbed_cases, &losses).unwrap();
        prop_assert_eq!(baseline, perturbed);
    }

    #[test]
    fn every_building_task_pair_has_exactly_one_outcome(cases in mission_strategy()) {
        let loss = LossTable::symmetric(0.3).unwrap();
        let post = run_post_event_stream(&cases, &CoverageModel::full_coverage(), &loss, 0.5)
            .unwrap();
        prop_assert_eq!(post.len(), cases.len());
        for case in &cases {
            let count = post
                .iter()
                .filter(|o| o.building_id == case.building_id && o.task == TaskId::Damage)
                .count();
            prop_assert_eq!(count, 1);
        }

        let pre = run_pre_event_stream(&cases, &PreEventLosses::uniform(loss)).unwrap();
        prop_assert_eq!(pre.len(), cases.len() * TaskId::PRE_EVENT.len());
        for case in &cases {
            for task in TaskId::PRE_EVENT {
                let count = pre
                    .iter()
                    .filter(|o| o.building_id == case.building_id && o.task == task)
                    .count();
                prop_assert_eq!(count, 1);
            }
        }
    }

    #[test]
    fn streams_are_deterministic(cases in mission_strategy()) {
        let loss = LossTable::symmetric(0.3).unwrap();
        let coverage = CoverageModel::full_coverage();
        let a = run_post_event_stream(&cases, &coverage, &loss, 0.5).unwrap();
        let b = run_post_event_stream(&cases, &coverage, &loss, 0.5).unwrap();
        prop_assert_eq!(a, b);
        let losses = PreEventLosses::uniform(loss);
        let a = run_pre_event_stream(&cases, &losses).unwrap();
        let b = run_pre_event_stream(&cases, &losses).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn raising_the_gate_threshold_never_admits_new_images(
        case in case_strategy(0),
        t_low in 0.0f64..=1.0,
        t_high in 0.0f64..=1.0,
    ) {
        let (t_low, t_high) = if t_low <= t_high { (t_low, t_high) } else { (t_high, t_low) };
        let (kept_low, _) = apply_overview_gate(&case, t_low);
        let (kept_high, _) = apply_overview_gate(&case, t_high);
        let low_ids: Vec<&str> = kept_low.images.iter().map(|i| i.image_id.as_str()).collect();
        for image in &kept_high.images {
            prop_assert!(low_ids.contains(&image.image_id.as_str()));
        }
    }

    #[test]
    fn grouping_is_idempotent(cases in mission_strategy()) {
        let (evidence, truths) = flatten_cases(&cases);
        let grouped = group_evidence(evidence, truths).unwrap();
        let (evidence_again, truths_again) = flatten_cases(&grouped);
        let regrouped = group_evidence(evidence_again, truths_again).unwrap();
        prop_assert_eq!(grouped, regrouped);
    }

    #[test]
    fn grouping_well_formed_rows_yields_valid_cases(cases in mission_strategy()) {
        let (evidence, truths) = flatten_cases(&cases);
        let grouped = group_evidence(evidence, truths).unwrap();
        for case in &grouped {
            prop_assert!(validate_case(case).is_empty());
        }
    }
}

#[test]
fn post_event_outcomes_ignore_pre_event_scores() {
    // Deterministic spot check of the reverse direction: adding or
    // changing pre-event scores leaves the post-event outcomes alone.
    let base = BuildingCase::new("b1")
        .with_truth(TaskId::Damage, TruthLabel::Positive)
        .with_image(
            ImageEvidence::new("b1", "i1")
                .with_score(TaskId::Overview, 0.9)
                .with_score(TaskId::Damage, 0.8),
        );
    let with_pre = BuildingCase::new("b1")
        .with_truth(TaskId::Damage, TruthLabel::Positive)
        .with_image(
            ImageEvidence::new("b1", "i1")
                .with_score(TaskId::Overview, 0.9)
                .with_score(TaskId::Damage, 0.8)
                .with_score(TaskId::Elevation, 0.99)
                .with_score(TaskId::Stories, 0.01)
                .with_score(TaskId::Material, 0.42),
        );
    let loss = LossTable::symmetric(0.3).unwrap();
    let coverage = CoverageModel::full_coverage();
    let a = run_post_event_stream(&[base], &coverage, &loss, 0.5).unwrap();
    let b = run_post_event_stream(&[with_pre], &coverage, &loss, 0.5).unwrap();
    assert_eq!(a, b);
}

#[test]
fn truth_only_buildings_flow_through_grouping_into_outcomes() {
    let truths = vec![TruthEntry {
        building_id: "b9".into(),
        task: TaskId::Damage,
        label: TruthLabel::Positive,
    }];
    let cases = group_evidence([], truths).unwrap();
    assert_eq!(cases.len(), 1);
    assert!(cases[0].images.is_empty());
    let loss = LossTable::symmetric(0.3).unwrap();
    let outcomes =
        run_post_event_stream(&cases, &CoverageModel::full_coverage(), &loss, 0.5).unwrap();
    assert_eq!(outcomes.len(), 1);
    assert_eq!(outcomes[0].outcome, recon_fusion::pipeline::Outcome::NoOverview);
}
