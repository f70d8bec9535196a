//! Collective-action interventions on valuation laws.
//!
//! A horizontal collective is an `alpha` fraction of arriving workers who
//! refuse any price below a floor. A vertical collective takes the lowest
//! `epsilon` of probability mass in targeted categories and moves it to 1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{DistributionError, ValuationDistribution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollectiveError {
    #[error("{floors} floors given for {categories} categories")]
    FloorCount { floors: usize, categories: usize },
    #[error("targeted category {index} out of range for {categories} categories")]
    TargetOutOfRange { index: usize, categories: usize },
    #[error("target fraction must lie in (0, 1], got {0}")]
    TargetFraction(f64),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizontalPlan {
    pub alpha: f64,
    pub floors: Vec<f64>,
}

impl HorizontalPlan {
    /// One floor shared by `m` categories.
    pub fn uniform_floor(alpha: f64, floor: f64, m: usize) -> Self {
        Self {
            alpha,
            floors: vec![floor; m],
        }
    }

    pub fn min_floor(&self) -> f64 {
        self.floors.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalPlan {
    pub epsilon: f64,
    pub target_fraction: f64,
    /// Ascending, distinct category indices.
    pub targeted: Vec<usize>,
}

impl VerticalPlan {
    /// Targets the first `ceil(fraction * m)` categories.
    pub fn first_fraction(epsilon: f64, fraction: f64, m: usize) -> Result<Self, CollectiveError> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(CollectiveError::TargetFraction(fraction));
        }
        // Guard against 0.3 * 10 = 3.0000000000000004.
        let count = ((fraction * m as f64) - 1e-9).ceil().max(0.0) as usize;
        Ok(Self {
            epsilon,
            target_fraction: fraction,
            targeted: (0..count.min(m)).collect(),
        })
    }

    pub fn all(epsilon: f64, m: usize) -> Self {
        Self {
            epsilon,
            target_fraction: 1.0,
            targeted: (0..m).collect(),
        }
    }

    pub fn with_indices(
        epsilon: f64,
        mut indices: Vec<usize>,
        m: usize,
    ) -> Result<Self, CollectiveError> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&bad) = indices.iter().find(|&&i| i >= m) {
            return Err(CollectiveError::TargetOutOfRange {
                index: bad,
                categories: m,
            });
        }
        let target_fraction = if m == 0 {
            0.0
        } else {
            indices.len() as f64 / m as f64
        };
        Ok(Self {
            epsilon,
            target_fraction,
            targeted: indices,
        })
    }
}

/// A targeted category whose atom at zero is at least the budget, so the
/// shift cannot lift its price floor above zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetWarning {
    pub category: usize,
    pub epsilon: f64,
    pub critical_budget: f64,
}

impl std::fmt::Display for BudgetWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "category {}: budget {} does not exceed critical budget {}; floor stays at 0",
            self.category, self.epsilon, self.critical_budget
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerticalOutcome {
    pub distributions: Vec<ValuationDistribution>,
    pub warnings: Vec<BudgetWarning>,
}

pub fn apply_horizontal(
    plan: &HorizontalPlan,
    ds: &[ValuationDistribution],
) -> Result<Vec<ValuationDistribution>, CollectiveError> {
    if plan.floors.len() != ds.len() {
        return Err(CollectiveError::FloorCount {
            floors: plan.floors.len(),
            categories: ds.len(),
        });
    }
    ds.iter()
        .zip(&plan.floors)
        .map(|(d, &floor)| {
            Ok(ValuationDistribution::horizontal_mix(
                d.clone(),
                plan.alpha,
                floor,
            )?)
        })
        .collect()
}

pub fn apply_vertical(
    plan: &VerticalPlan,
    ds: &[ValuationDistribution],
) -> Result<VerticalOutcome, CollectiveError> {
    let mut out = ds.to_vec();
    let mut warnings = Vec::new();
    for &i in &plan.targeted {
        let d = ds.get(i).ok_or(CollectiveError::TargetOutOfRange {
            index: i,
            categories: ds.len(),
        })?;
        let critical = critical_budget(d);
        if plan.epsilon <= critical {
            warnings.push(BudgetWarning {
                category: i,
                epsilon: plan.epsilon,
                critical_budget: critical,
            });
        }
        out[i] = ValuationDistribution::vertical_shift(d.clone(), plan.epsilon)?;
    }
    Ok(VerticalOutcome {
        distributions: out,
        warnings,
    })
}

/// Smallest budget above which a vertical shift gives the category a positive
/// price floor: the mass at zero.
pub fn critical_budget(d: &ValuationDistribution) -> f64 {
    d.atom_at_zero()
}

/// Critical budget across a market: the largest per-category value.
pub fn market_critical_budget(ds: &[ValuationDistribution]) -> f64 {
    ds.iter().map(critical_budget).fold(0.0, f64::max)
}
