//! Building-level fusion of per-image classifier scores.
//!
//! Each image of a building gets an independent positive-class
//! probability from its classifier. The building-level probability is
//! obtained by summing, over all 2^n binary label assignments to the n
//! images, a fusion rule p(C=1 | labels) weighted by the probability of
//! that assignment:
//!
//! ```text
//! p(C=1 | x_1..x_n) = sum over c in {0,1}^n of rule(c) * prod_i p_i^{c_i} (1-p_i)^{1-c_i}
//! ```
//!
//! [`fuse_by_enumeration`] evaluates that sum literally and serves as the
//! exact oracle. Two closed forms cover the shipped rules without the
//! exponential blow-up:
//!
//! - pre-event averaging: the fused value is the mean of the scores;
//! - post-event coverage weighting: `1 - P0 * (1 - (1 - q_n) * theta_n)`
//!   with `P0 = prod_i (1 - p_i)`, where `q_n` is the probability that n
//!   images cover the building and `theta_n` the probability that damage
//!   exists but is invisible in all n images. One confidently damaged
//!   image forces a damaged building; an all-clear reading is trusted
//!   only to the extent the building is covered.
//!
//! The closed forms never call the enumeration path (and vice versa), so
//! equivalence tests between the two are meaningful.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

/// Largest score vector [`fuse_by_enumeration`] accepts (2^20 terms).
pub const ENUMERATION_CAP: usize = 20;

/// Default probability that damage exists but is invisible in every image.
pub const DEFAULT_THETA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("cannot fuse an empty score list")]
    EmptyScores,
    #[error("enumeration over {n} images exceeds the cap of {cap}")]
    TooManyScores { n: usize, cap: usize },
    #[error("score {value} at position {index} is outside [0, 1]")]
    ScoreOutOfRange { index: usize, value: f64 },
    #[error("sequence entry {value} is outside [0, 1]")]
    SequenceOutOfRange { value: f64 },
    #[error("sequence must be non-decreasing ({previous} followed by {next})")]
    SequenceNotMonotone { previous: f64, next: f64 },
    #[error("image count must be at least 1")]
    ZeroImageCount,
    #[error("fusion rule returned {value}, outside [0, 1]")]
    RuleOutOfRange { value: f64 },
    #[error("cannot parse probability sequence from {input:?}")]
    SequenceParse { input: String },
}

/// A non-decreasing sequence of probabilities indexed by image count,
/// with a terminal value applied for every count beyond the stored
/// prefix. `"0.2,0.5,0.9,1"` means q_1=0.2, q_2=0.5, q_3=0.9, q_n=1 for
/// n >= 4; a single value means a constant sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilitySequence {
    prefix: Vec<f64>,
    tail: f64,
}

impl ProbabilitySequence {
    pub fn new(prefix: Vec<f64>, tail: f64) -> Result<Self, FusionError> {
        for &v in prefix.iter().chain(std::iter::once(&tail)) {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(FusionError::SequenceOutOfRange { value: v });
            }
        }
        for pair in prefix.windows(2) {
            if pair[0] > pair[1] {
                return Err(FusionError::SequenceNotMonotone { previous: pair[0], next: pair[1] });
            }
        }
        if let Some(&last) = prefix.last() {
            if last > tail {
                return Err(FusionError::SequenceNotMonotone { previous: last, next: tail });
            }
        }
        Ok(ProbabilitySequence { prefix, tail })
    }

    pub fn constant(value: f64) -> Result<Self, FusionError> {
        ProbabilitySequence::new(Vec::new(), value)
    }

    /// The value at image count `n` (1-based); the tail applies past the
    /// stored prefix.
    pub fn at(&self, n: usize) -> Result<f64, FusionError> {
        if n == 0 {
            return Err(FusionError::ZeroImageCount);
        }
        Ok(self.prefix.get(n - 1).copied().unwrap_or(self.tail))
    }

    pub fn prefix(&self) -> &[f64] {
        &self.prefix
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }
}

impl FromStr for ProbabilitySequence {
    type Err = FusionError;

    /// Parses `"q1,q2,...,tail"`; the last element is the terminal value.
    fn from_str(s: &str) -> Result<Self, FusionError> {
        let parse = |part: &str| -> Result<f64, FusionError> {
            part.trim()
                .parse::<f64>()
                .map_err(|_| FusionError::SequenceParse { input: s.to_string() })
        };
        let mut values = Vec::new();
        for part in s.split(',') {
            values.push(parse(part)?);
        }
        let tail = values.pop().ok_or_else(|| FusionError::SequenceParse { input: s.to_string() })?;
        ProbabilitySequence::new(values, tail)
    }
}

impl fmt::Display for ProbabilitySequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.prefix {
            write!(f, "{v},")?;
        }
        write!(f, "{}", self.tail)
    }
}

/// The coverage knowledge governing post-event fusion: `q_n`, the
/// probability that n images show every side of the building, and
/// `theta_n`, the probability that a building has major damage invisible
/// in all n images.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageModel {
    q: ProbabilitySequence,
    theta: ProbabilitySequence,
}

impl CoverageModel {
    pub fn new(q: ProbabilitySequence, theta: ProbabilitySequence) -> Self {
        CoverageModel { q, theta }
    }

    /// Every image set is assumed to cover its building (q_n = 1), with
    /// the default hidden-damage probability.
    pub fn full_coverage() -> Self {
        CoverageModel {
            q: ProbabilitySequence::constant(1.0).expect("constant 1 is valid"),
            theta: ProbabilitySequence::constant(DEFAULT_THETA).expect("constant 0.5 is valid"),
        }
    }

    /// q_n: the probability that `n` images cover the building.
    pub fn coverage_probability(&self, n: usize) -> Result<f64, FusionError> {
        self.q.at(n)
    }

    /// theta_n: the probability that damage exists but is invisible in
    /// all `n` images.
    pub fn hidden_damage_probability(&self, n: usize) -> Result<f64, FusionError> {
        self.theta.at(n)
    }

    pub fn q(&self) -> &ProbabilitySequence {
        &self.q
    }

    pub fn theta(&self) -> &ProbabilitySequence {
        &self.theta
    }
}

/// An arbitrary fusion rule over the binary label vector.
pub type CustomRule = Arc<dyn Fn(&[bool]) -> f64 + Send + Sync>;

/// The fusion rule p(C=1 | image labels) used inside the enumeration.
#[derive(Clone)]
pub enum FusionRule {
    /// Fraction of positive labels (pre-event attributes).
    PreEventAverage,
    /// Coverage-weighted rule (post-event damage): any positive label
    /// forces 1; an all-negative vector yields `(1 - q_n) * theta_n`.
    PostEventCoverage(CoverageModel),
    /// Extension point: an arbitrary function of the binary label
    /// vector, returning a probability in [0, 1].
    Custom(CustomRule),
}

impl FusionRule {
    /// Evaluates the rule on one label vector.
    pub fn label_probability(&self, labels: &[bool]) -> Result<f64, FusionError> {
        let n = labels.len();
        if n == 0 {
            return Err(FusionError::EmptyScores);
        }
        let value = match self {
            FusionRule::PreEventAverage => {
                labels.iter().filter(|&&c| c).count() as f64 / n as f64
            }
            FusionRule::PostEventCoverage(coverage) => {
                let q = coverage.coverage_probability(n)?;
                let theta = coverage.hidden_damage_probability(n)?;
                let any_positive = labels.iter().any(|&c| c);
                if any_positive {
                    // Covered or not, one damaged image labels the building damaged.
                    1.0
                } else {
                    // The covered branch contributes 0 for an all-negative vector.
                    (1.0 - q) * theta
                }
            }
            FusionRule::Custom(f) => f(labels),
        };
        if !(0.0..=1.0).contains(&value) || value.is_nan() {
            return Err(FusionError::RuleOutOfRange { value });
        }
        Ok(value)
    }
}

impl fmt::Debug for FusionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FusionRule::PreEventAverage => f.write_str("PreEventAverage"),
            FusionRule::PostEventCoverage(c) => f.debug_tuple("PostEventCoverage").field(c).finish(),
            FusionRule::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// A fused building-level probability for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionResult {
    pub building_id: String,
    pub task_id: crate::task::TaskId,
    /// Number of images that actually contributed scores.
    pub n_images: usize,
    pub p_positive: f64,
}

fn check_scores(scores: &[f64]) -> Result<(), FusionError> {
    if scores.is_empty() {
        return Err(FusionError::EmptyScores);
    }
    for (index, &value) in scores.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) || value.is_nan() {
            return Err(FusionError::ScoreOutOfRange { index, value });
        }
    }
    Ok(())
}

/// Exact fusion by summing over all 2^n label vectors.
///
/// This is the reference path: exponential, capped at
/// [`ENUMERATION_CAP`] images, and used to validate the closed forms.
pub fn fuse_by_enumeration(scores: &[f64], rule: &FusionRule) -> Result<f64, FusionError> {
    check_scores(scores)?;
    let n = scores.len();
    if n > ENUMERATION_CAP {
        return Err(FusionError::TooManyScores { n, cap: ENUMERATION_CAP });
    }
    let mut labels = vec![false; n];
    let mut total = 0.0;
    for mask in 0u32..(1u32 << n) {
        let mut weight = 1.0;
        for (i, label) in labels.iter_mut().enumerate() {
            let positive = (mask >> i) & 1 == 1;
            *label = positive;
            weight *= if positive { scores[i] } else { 1.0 - scores[i] };
        }
        total += weight * rule.label_probability(&labels)?;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Closed form of the averaging rule: the mean score.
pub fn fuse_pre_event(scores: &[f64]) -> Result<f64, FusionError> {
    check_scores(scores)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Closed form of the coverage-weighted rule:
/// `1 - P0 * (1 - (1 - q_n) * theta_n)` with `P0 = prod_i (1 - p_i)`.
pub fn fuse_post_event(scores: &[f64], coverage: &CoverageModel) -> Result<f64, FusionError> {
    check_scores(scores)?;
    let n = scores.len();
    let q = coverage.coverage_probability(n)?;
    let theta = coverage.hidden_damage_probability(n)?;
    let p0: f64 = scores.iter().map(|p| 1.0 - p).product();
    Ok(1.0 - p0 * (1.0 - (1.0 - q) * theta))
}
