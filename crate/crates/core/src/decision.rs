//! Expected-loss decisions over {positive, negative, no-decision}.
//!
//! Correct calls cost 0, mistakes cost 1, and declining to decide costs
//! `alpha1` against a truly positive building and `alpha2` against a
//! truly negative one. The rational decision minimizes expected loss
//! under the fused probability; No Decision exists precisely so the
//! pipeline can abstain when neither call is confident.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecisionError {
    #[error("loss parameter {name} must be a finite nonnegative number, got {value}")]
    InvalidLoss { name: &'static str, value: f64 },
    #[error("fused probability {value} is outside [0, 1]")]
    ProbabilityOutOfRange { value: f64 },
}

/// The 2-truth x 3-decision loss matrix, parameterized by the two
/// abstention costs. Correct decisions cost 0 and mistakes cost 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTable {
    alpha1: f64,
    alpha2: f64,
}

impl LossTable {
    /// Both parameters must be finite and nonnegative. Values above 1
    /// are accepted (see [`validation_notes`][Self::validation_notes]).
    pub fn new(alpha1: f64, alpha2: f64) -> Result<Self, DecisionError> {
        if !alpha1.is_finite() || alpha1 < 0.0 {
            return Err(DecisionError::InvalidLoss { name: "alpha1", value: alpha1 });
        }
        if !alpha2.is_finite() || alpha2 < 0.0 {
            return Err(DecisionError::InvalidLoss { name: "alpha2", value: alpha2 });
        }
        Ok(LossTable { alpha1, alpha2 })
    }

    /// Shared abstention cost for both truth values.
    pub fn symmetric(alpha: f64) -> Result<Self, DecisionError> {
        LossTable::new(alpha, alpha)
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }

    /// Non-fatal observations about the parameter choice. An abstention
    /// cost above 1 exceeds the mistake cost, so no-decision can never
    /// be strictly optimal on that side.
    pub fn validation_notes(&self) -> Vec<String> {
        let mut notes = Vec::new();
        if self.alpha1 > 1.0 {
            notes.push(format!(
                "alpha1 = {} exceeds the mistake cost of 1; no-decision never helps on positives",
                self.alpha1
            ));
        }
        if self.alpha2 > 1.0 {
            notes.push(format!(
                "alpha2 = {} exceeds the mistake cost of 1; no-decision never helps on negatives",
                self.alpha2
            ));
        }
        notes
    }

    /// Expected loss of taking `decision` when the positive-class
    /// probability is `p`.
    pub fn expected_loss(&self, decision: DecisionValue, p: f64) -> f64 {
        match decision {
            DecisionValue::Positive => 1.0 - p,
            DecisionValue::Negative => p,
            // alpha1*p + alpha2*(1-p), grouped so that the symmetric case
            // evaluates to exactly alpha.
            DecisionValue::NoDecision => self.alpha2 + (self.alpha1 - self.alpha2) * p,
        }
    }

    /// The loss-minimizing decision at probability `p`, with ties broken
    /// no-decision, then negative, then positive: a tie means the
    /// evidence does not strictly favor acting.
    pub fn decide(&self, p: f64) -> Result<Decision, DecisionError> {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(DecisionError::ProbabilityOutOfRange { value: p });
        }
        let losses = ExpectedLosses {
            positive: self.expected_loss(DecisionValue::Positive, p),
            negative: self.expected_loss(DecisionValue::Negative, p),
            no_decision: self.expected_loss(DecisionValue::NoDecision, p),
        };
        let value = [
            DecisionValue::NoDecision,
            DecisionValue::Negative,
            DecisionValue::Positive,
        ]
        .into_iter()
        .min_by(|a, b| {
            losses
                .get(*a)
                .partial_cmp(&losses.get(*b))
                .expect("finite losses")
        })
        .expect("non-empty decision set");
        Ok(Decision { value, expected_losses: losses, fused_p: p })
    }

    /// The closed interval of probabilities where no-decision is weakly
    /// optimal. Empty (lo > hi) when abstaining never beats both calls;
    /// for a symmetric table with cost `a` it is exactly `[a, 1 - a]`.
    pub fn reject_region(&self) -> RejectRegion {
        let diff = self.alpha1 - self.alpha2;

        // no-decision <= negative-loss: alpha2 <= p * (1 - diff)
        let denom_lo = 1.0 - diff;
        let lower = if denom_lo > 0.0 {
            Interval { lo: self.alpha2 / denom_lo, hi: 1.0 }
        } else if self.alpha2 == 0.0 {
            // Ties everywhere when the boundary slope vanishes, or only
            // the endpoint p = 0 when it flips.
            if denom_lo == 0.0 {
                Interval { lo: 0.0, hi: 1.0 }
            } else {
                Interval { lo: 0.0, hi: 0.0 }
            }
        } else {
            Interval::EMPTY
        };

        // no-decision <= positive-loss: p * (1 + diff) <= 1 - alpha2
        let denom_hi = 1.0 + diff;
        let upper = if denom_hi > 0.0 {
            Interval { lo: 0.0, hi: (1.0 - self.alpha2) / denom_hi }
        } else if denom_hi == 0.0 {
            if self.alpha2 <= 1.0 {
                Interval { lo: 0.0, hi: 1.0 }
            } else {
                Interval::EMPTY
            }
        } else {
            Interval { lo: (1.0 - self.alpha2) / denom_hi, hi: 1.0 }
        };

        let lo = lower.lo.max(upper.lo).max(0.0);
        let hi = lower.hi.min(upper.hi).min(1.0);
        RejectRegion { lo, hi }
    }
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    const EMPTY: Interval = Interval { lo: 1.0, hi: 0.0 };
}

/// One of the three available decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DecisionValue {
    Positive,
    Negative,
    NoDecision,
}

impl fmt::Display for DecisionValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecisionValue::Positive => "positive",
            DecisionValue::Negative => "negative",
            DecisionValue::NoDecision => "no_decision",
        })
    }
}

/// The expected loss of each available decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedLosses {
    pub positive: f64,
    pub negative: f64,
    pub no_decision: f64,
}

impl ExpectedLosses {
    pub fn get(&self, decision: DecisionValue) -> f64 {
        match decision {
            DecisionValue::Positive => self.positive,
            DecisionValue::Negative => self.negative,
            DecisionValue::NoDecision => self.no_decision,
        }
    }
}

/// The outcome of one expected-loss minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub value: DecisionValue,
    pub expected_losses: ExpectedLosses,
    pub fused_p: f64,
}

/// Closed interval of fused probabilities where no-decision wins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RejectRegion {
    pub lo: f64,
    pub hi: f64,
}

impl RejectRegion {
    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn contains(&self, p: f64) -> bool {
        !self.is_empty() && p >= self.lo && p <= self.hi
    }

    /// Width of the interval; 0 for empty regions.
    pub fn width(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }
}
