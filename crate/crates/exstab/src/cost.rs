//! Query-cost accounting and deployment-tier assignment.
//!
//! A leave-one-out explanation of an `n`-word document costs `n + 1` model
//! queries, so explaining a corpus with mean word count `w` multiplies the
//! per-prediction price by `(w + 1)`. [`cost_multiplier`] captures that, and
//! [`assign_tier`] maps a model's measured flip rate onto one of three
//! deployment tiers: stable enough for regulated use, a balanced middle, or
//! fast-and-loose. Thresholds default to 0.10 / 0.20 and must be strictly
//! increasing inside (0, 1).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deployment tier implied by a model's explanation stability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    /// Flip rate below the lower threshold: stable enough for
    /// regulation-sensitive deployments.
    Regulatory,
    /// Flip rate between the thresholds: acceptable general-purpose
    /// stability.
    Balanced,
    /// Flip rate at or above the upper threshold: prioritize only when
    /// speed or cost outweighs explanation stability.
    SpeedFirst,
}

impl Tier {
    /// Wire name (snake_case).
    pub fn name(self) -> &'static str {
        match self {
            Tier::Regulatory => "regulatory",
            Tier::Balanced => "balanced",
            Tier::SpeedFirst => "speed_first",
        }
    }
}

impl std::fmt::Display for Tier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Flip-rate boundaries between tiers. A rate strictly below
/// `regulatory_max` is regulatory; strictly below `balanced_max` is
/// balanced; anything else is speed-first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TierThresholds {
    /// Upper bound (exclusive) of the regulatory tier.
    pub regulatory_max: f64,
    /// Upper bound (exclusive) of the balanced tier.
    pub balanced_max: f64,
}

impl Default for TierThresholds {
    fn default() -> Self {
        TierThresholds {
            regulatory_max: 0.10,
            balanced_max: 0.20,
        }
    }
}

impl TierThresholds {
    /// Thresholds must satisfy `0 < regulatory_max < balanced_max < 1`.
    pub fn validate(&self) -> Result<()> {
        let ok = self.regulatory_max > 0.0
            && self.regulatory_max < self.balanced_max
            && self.balanced_max < 1.0;
        if !ok {
            return Err(Error::Config(format!(
                "tier thresholds must satisfy 0 < regulatory < balanced < 1, got {} and {}",
                self.regulatory_max, self.balanced_max
            )));
        }
        Ok(())
    }
}

/// Map a flip rate onto its deployment tier.
pub fn assign_tier(flip_rate: f64, thresholds: &TierThresholds) -> Result<Tier> {
    thresholds.validate()?;
    if !(0.0..=1.0).contains(&flip_rate) {
        return Err(Error::InvalidInput(format!(
            "flip rate must be in [0, 1], got {flip_rate}"
        )));
    }
    Ok(if flip_rate < thresholds.regulatory_max {
        Tier::Regulatory
    } else if flip_rate < thresholds.balanced_max {
        Tier::Balanced
    } else {
        Tier::SpeedFirst
    })
}

/// Explanation cost multiplier over plain prediction:
/// `(mean_word_count + 1) * per_call_cost` for leave-one-out explanations.
pub fn cost_multiplier(mean_word_count: f64, per_call_cost: f64) -> Result<f64> {
    if !(mean_word_count.is_finite() && mean_word_count > 0.0) {
        return Err(Error::InvalidInput(format!(
            "mean word count must be positive, got {mean_word_count}"
        )));
    }
    if !(per_call_cost.is_finite() && per_call_cost > 0.0) {
        return Err(Error::Config(format!(
            "per-call cost must be positive, got {per_call_cost}"
        )));
    }
    Ok((mean_word_count + 1.0) * per_call_cost)
}

/// One model's cost/stability summary in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostProfile {
    /// Model name.
    pub model: String,
    /// Mean word count of the evaluated documents.
    pub mean_word_count: f64,
    /// Configured relative price of one model call.
    pub per_call_cost: f64,
    /// `(mean_word_count + 1) * per_call_cost`.
    pub cost_multiplier: f64,
    /// Overall flip rate the tier is based on.
    pub flip_rate: f64,
    /// Thresholds used for the assignment.
    pub thresholds: TierThresholds,
    /// Assigned deployment tier.
    pub tier: Tier,
}

/// Build a [`CostProfile`] from measured quantities.
pub fn cost_profile(
    model: impl Into<String>,
    mean_word_count: f64,
    per_call_cost: f64,
    flip_rate: f64,
    thresholds: TierThresholds,
) -> Result<CostProfile> {
    Ok(CostProfile {
        model: model.into(),
        mean_word_count,
        per_call_cost,
        cost_multiplier: cost_multiplier(mean_word_count, per_call_cost)?,
        flip_rate,
        thresholds,
        tier: assign_tier(flip_rate, &thresholds)?,
    })
}
