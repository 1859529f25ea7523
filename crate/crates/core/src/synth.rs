//! Seeded synthetic reconnaissance missions.
//!
//! Generates buildings with known damage truth, per-image damage
//! visibility, and classifier scores drawn from beta distributions, so
//! the coverage and loss analyses can be validated at desk scale. The
//! generator is deterministic: a fixed ChaCha12 stream (integer-state,
//! portable across platforms) is consumed in a fixed order, so a seed
//! pins the entire mission byte for byte.
//!
//! The image-count spec can cap how many images undamaged buildings
//! receive, reproducing the collector bias of field teams photographing
//! damage more thoroughly than its absence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Beta, Distribution};
use thiserror::Error;

use crate::evidence::{BuildingCase, ImageEvidence};
use crate::task::{TaskId, TruthLabel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("{name} must be a probability in [0, 1], got {value}")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("concentration must be positive and finite, got {value}")]
    InvalidConcentration { value: f64 },
    #[error("image count range is invalid (min {min}, max {max})")]
    InvalidImageCounts { min: u32, max: u32 },
}

/// A beta distribution parameterized by mean and concentration
/// (shape parameters `mean * concentration` and `(1 - mean) * concentration`).
/// Means of exactly 0 or 1 degenerate to constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSpec {
    pub mean: f64,
    pub concentration: f64,
}

impl BetaSpec {
    pub fn new(mean: f64, concentration: f64) -> Result<Self, SynthError> {
        if !(0.0..=1.0).contains(&mean) || mean.is_nan() {
            return Err(SynthError::InvalidProbability { name: "mean", value: mean });
        }
        if !concentration.is_finite() || concentration <= 0.0 {
            return Err(SynthError::InvalidConcentration { value: concentration });
        }
        Ok(BetaSpec { mean, concentration })
    }

    fn sampler(&self) -> Option<Beta<f64>> {
        if self.mean <= 0.0 || self.mean >= 1.0 {
            return None;
        }
        let a = self.mean * self.concentration;
        let b = (1.0 - self.mean) * self.concentration;
        Some(Beta::new(a, b).expect("positive shape parameters"))
    }

    fn sample(&self, sampler: &Option<Beta<f64>>, rng: &mut ChaCha12Rng) -> f64 {
        match sampler {
            Some(beta) => beta.sample(rng),
            None => self.mean,
        }
    }
}

/// Score distributions conditioned on what the image actually shows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreModel {
    /// Damage score when the image shows real damage.
    pub damage_visible: BetaSpec,
    /// Damage score when it does not.
    pub damage_hidden: BetaSpec,
    /// Overview score for overview-quality images.
    pub overview: BetaSpec,
    /// Overview score for non-overview images.
    pub non_overview: BetaSpec,
}

/// How many images each building receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageCountSpec {
    pub min: u32,
    pub max: u32,
    /// Optional collector-bias cap applied to undamaged buildings.
    pub negative_max: Option<u32>,
}

impl ImageCountSpec {
    pub fn uniform(min: u32, max: u32) -> Self {
        ImageCountSpec { min, max, negative_max: None }
    }

    pub fn with_negative_cap(mut self, cap: u32) -> Self {
        self.negative_max = Some(cap);
        self
    }

    fn range_for(&self, damaged: bool) -> (u32, u32) {
        let max = if damaged { self.max } else { self.negative_max.unwrap_or(self.max) };
        (self.min.min(max), max)
    }
}

/// Full mission recipe. Generation is deterministic given `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_buildings: usize,
    /// Fraction of buildings with true major damage.
    pub md_prevalence: f64,
    pub images_per_building: ImageCountSpec,
    /// Probability that an image of a damaged building shows the damage.
    pub damage_visibility: f64,
    pub score_model: ScoreModel,
    /// Probability that an image is non-overview quality.
    pub nov_rate: f64,
}

impl SynthConfig {
    /// A plausible desk-scale mission: mildly noisy classifiers, most
    /// damage visible, one to six images per building, no collector bias.
    pub fn baseline(seed: u64) -> Self {
        SynthConfig {
            seed,
            n_buildings: 1000,
            md_prevalence: 0.3,
            images_per_building: ImageCountSpec::uniform(1, 6),
            damage_visibility: 0.7,
            score_model: ScoreModel {
                damage_visible: BetaSpec { mean: 0.92, concentration: 14.0 },
                damage_hidden: BetaSpec { mean: 0.12, concentration: 14.0 },
                overview: BetaSpec { mean: 0.85, concentration: 10.0 },
                non_overview: BetaSpec { mean: 0.15, concentration: 10.0 },
            },
            nov_rate: 0.2,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        for (name, value) in [
            ("md_prevalence", self.md_prevalence),
            ("damage_visibility", self.damage_visibility),
            ("nov_rate", self.nov_rate),
        ] {
            if !(0.0..=1.0).contains(&value) || value.is_nan() {
                return Err(SynthError::InvalidProbability { name, value });
            }
        }
        let counts = &self.images_per_building;
        if counts.min > counts.max {
            return Err(SynthError::InvalidImageCounts { min: counts.min, max: counts.max });
        }
        for spec in [
            self.score_model.damage_visible,
            self.score_model.damage_hidden,
            self.score_model.overview,
            self.score_model.non_overview,
        ] {
            BetaSpec::new(spec.mean, spec.concentration)?;
        }
        Ok(())
    }
}

/// Which images truly show damage; kept aside from the evidence so
/// oracle checks can compare against what the classifiers were shown.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibilityRecord {
    pub building_id: String,
    pub image_id: String,
    pub shows_damage: bool,
}

/// A generated mission: cases with truths, plus the hidden visibility ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct Mission {
    pub cases: Vec<BuildingCase>,
    pub visibility: Vec<VisibilityRecord>,
}

/// Generates one mission. Buildings are emitted in id order; each one
/// consumes RNG draws in a fixed order (truth, image count, then per
/// image: quality, overview score, visibility, damage score).
pub fn generate_mission(config: &SynthConfig) -> Result<Mission, SynthError> {
    config.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let model = &config.score_model;
    let visible_sampler = model.damage_visible.sampler();
    let hidden_sampler = model.damage_hidden.sampler();
    let overview_sampler = model.overview.sampler();
    let non_overview_sampler = model.non_overview.sampler();

    let mut cases = Vec::with_capacity(config.n_buildings);
    let mut visibility = Vec::new();
    for b in 0..config.n_buildings {
        let building_id = format!("B{b:05}");
        let damaged = rng.random_bool(config.md_prevalence);
        let (min, max) = config.images_per_building.range_for(damaged);
        let n_images = rng.random_range(min..=max);

        let mut case = BuildingCase::new(&building_id).with_truth(
            TaskId::Damage,
            if damaged { TruthLabel::Positive } else { TruthLabel::Negative },
        );
        for i in 0..n_images {
            let image_id = format!("{building_id}-I{:02}", i + 1);
            let non_overview = rng.random_bool(config.nov_rate);
            let overview_score = if non_overview {
                model.non_overview.sample(&non_overview_sampler, &mut rng)
            } else {
                model.overview.sample(&overview_sampler, &mut rng)
            };
            let shows_damage = damaged && rng.random_bool(config.damage_visibility);
            let damage_score = if shows_damage {
                model.damage_visible.sample(&visible_sampler, &mut rng)
            } else {
                model.damage_hidden.sample(&hidden_sampler, &mut rng)
            };
            case = case.with_image(
                ImageEvidence::new(&building_id, &image_id)
                    .with_score(TaskId::Overview, overview_score)
                    .with_score(TaskId::Damage, damage_score),
            );
            visibility.push(VisibilityRecord { building_id: building_id.clone(), image_id, shows_damage });
        }
        cases.push(case);
    }
    Ok(Mission { cases, visibility })
}

/// Image-count statistics for one truth class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageCountStats {
    pub buildings: usize,
    pub total_images: usize,
    pub mean: f64,
    pub min: usize,
    pub max: usize,
}

/// Per-truth-class image-count summary.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    pub task: TaskId,
    pub classes: Vec<(TruthLabel, ImageCountStats)>,
}

impl std::fmt::Display for BiasReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "image counts per {} truth class:", self.task)?;
        for (label, stats) in &self.classes {
            writeln!(
                f,
                "  {}: {} buildings, mean {:.2} images (min {}, max {})",
                label.render(self.task),
                stats.buildings,
                stats.mean,
                stats.min,
                stats.max
            )?;
        }
        Ok(())
    }
}

/// Summarizes image counts per truth class, to confirm whether a mission
/// carries collector bias. Buildings without a truth entry for the task
/// count as unlabeled.
pub fn bias_report(cases: &[BuildingCase], task: TaskId) -> BiasReport {
    let mut per_class: std::collections::BTreeMap<TruthLabel, Vec<usize>> =
        std::collections::BTreeMap::new();
    for case in cases {
        let label = case.truth.get(&task).copied().unwrap_or(TruthLabel::Unlabeled);
        per_class.entry(label).or_default().push(case.images.len());
    }
    let classes = per_class
        .into_iter()
        .map(|(label, counts)| {
            let total: usize = counts.iter().sum();
            let stats = ImageCountStats {
                buildings: counts.len(),
                total_images: total,
                mean: total as f64 / counts.len() as f64,
                min: counts.iter().copied().min().unwrap_or(0),
                max: counts.iter().copied().max().unwrap_or(0),
            };
            (label, stats)
        })
        .collect();
    BiasReport { task, classes }
}
