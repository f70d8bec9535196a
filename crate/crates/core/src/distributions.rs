//! Valuation laws for worker reservation prices.
//!
//! Every law lives on [0, 1]. The quantile is the left quantile
//! `Q(u) = inf{x : D(x) >= u}`, defined for `u` in (0, 1]; sampling is by
//! inverse transform. Collective-action transforms are themselves laws
//! ([`ValuationDistribution::HorizontalMix`] and
//! [`ValuationDistribution::VerticalShift`]) so they compose with everything
//! else.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::RandomStream;

/// Absolute tolerance for piecewise-branch thresholds.
pub const BRANCH_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("quantile level must lie in (0, 1], got {0}")]
    QuantileLevel(f64),
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    Parameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

fn param(
    name: &'static str,
    value: f64,
    ok: bool,
    reason: &'static str,
) -> Result<(), DistributionError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(DistributionError::Parameter {
            name,
            value,
            reason,
        })
    }
}

/// A category's worker-cost law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValuationDistribution {
    Uniform,
    /// Beta(a, 1): `D(x) = x^a`.
    #[serde(rename = "beta_a1")]
    BetaA1 {
        a: f64,
    },
    /// Beta(1, b): `D(x) = 1 - (1 - x)^b`.
    #[serde(rename = "beta_1b")]
    Beta1B {
        b: f64,
    },
    /// Exponential(lambda) truncated to [0, 1] and renormalized.
    #[serde(rename = "trunc_exp")]
    TruncExp {
        lambda: f64,
    },
    #[serde(rename = "point_mass", alias = "pointmass")]
    PointMass {
        p: f64,
    },
    /// The base law mapped affinely onto [gap, 1].
    GapShifted {
        base: Box<ValuationDistribution>,
        gap: f64,
    },
    /// `(1 - alpha) * base + alpha * delta(floor)`.
    HorizontalMix {
        base: Box<ValuationDistribution>,
        alpha: f64,
        floor: f64,
    },
    /// Lowest `epsilon` mass of the base removed and placed at 1.
    VerticalShift {
        base: Box<ValuationDistribution>,
        epsilon: f64,
    },
}

/// Growth class of the CDF near the left end of the support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", content = "exponent", rename_all = "snake_case")]
pub enum TailClass {
    /// Support bounded away from zero.
    Gap,
    /// `D(x) >= c x` near zero.
    Linear,
    /// `D(x) ~ x^a` with `a > 1`.
    PolySuper(f64),
    /// `D(x) ~ x^b` with `b < 1`.
    PolySub(f64),
    /// Positive mass at zero.
    Atom,
    Unknown,
}

/// Asymptotic order of the total SWS cost for i.i.d. categories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", content = "exponent", rename_all = "snake_case")]
pub enum CostRegime {
    Linear,
    Sublinear(f64),
    Log,
    Constant,
}

impl TailClass {
    /// The cost regime the left-tail class implies under SWS.
    pub fn cost_regime(&self) -> Option<CostRegime> {
        match *self {
            TailClass::Gap => Some(CostRegime::Linear),
            TailClass::Linear => Some(CostRegime::Log),
            TailClass::PolySuper(a) => Some(CostRegime::Sublinear(1.0 - 1.0 / a)),
            TailClass::PolySub(_) | TailClass::Atom => Some(CostRegime::Constant),
            TailClass::Unknown => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailProfile {
    /// Infimum of the support, `inf{x : D(x) > 0}`.
    pub gap: f64,
    /// `D(0)`.
    pub atom_at_zero: f64,
    pub class: TailClass,
}

use ValuationDistribution as VD;

impl ValuationDistribution {
    pub fn uniform() -> Self {
        VD::Uniform
    }

    pub fn beta_a1(a: f64) -> Result<Self, DistributionError> {
        let d = VD::BetaA1 { a };
        d.validate()?;
        Ok(d)
    }

    pub fn beta_1b(b: f64) -> Result<Self, DistributionError> {
        let d = VD::Beta1B { b };
        d.validate()?;
        Ok(d)
    }

    pub fn trunc_exp(lambda: f64) -> Result<Self, DistributionError> {
        let d = VD::TruncExp { lambda };
        d.validate()?;
        Ok(d)
    }

    pub fn point_mass(p: f64) -> Result<Self, DistributionError> {
        let d = VD::PointMass { p };
        d.validate()?;
        Ok(d)
    }

    pub fn gap_shifted(base: Self, gap: f64) -> Result<Self, DistributionError> {
        let d = VD::GapShifted {
            base: Box::new(base),
            gap,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn horizontal_mix(base: Self, alpha: f64, floor: f64) -> Result<Self, DistributionError> {
        let d = VD::HorizontalMix {
            base: Box::new(base),
            alpha,
            floor,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn vertical_shift(base: Self, epsilon: f64) -> Result<Self, DistributionError> {
        let d = VD::VerticalShift {
            base: Box::new(base),
            epsilon,
        };
        d.validate()?;
        Ok(d)
    }

    /// Checks parameter ranges recursively. Deserialized descriptors must pass
    /// through this before use.
    pub fn validate(&self) -> Result<(), DistributionError> {
        match self {
            VD::Uniform => Ok(()),
            VD::BetaA1 { a } => param("a", *a, *a > 0.0, "must be positive"),
            VD::Beta1B { b } => param("b", *b, *b > 0.0, "must be positive"),
            VD::TruncExp { lambda } => param("lambda", *lambda, *lambda > 0.0, "must be positive"),
            VD::PointMass { p } => param("p", *p, (0.0..=1.0).contains(p), "must lie in [0, 1]"),
            VD::GapShifted { base, gap } => {
                param("gap", *gap, *gap > 0.0 && *gap < 1.0, "must lie in (0, 1)")?;
                base.validate()
            }
            VD::HorizontalMix { base, alpha, floor } => {
                param(
                    "alpha",
                    *alpha,
                    (0.0..1.0).contains(alpha),
                    "must lie in [0, 1)",
                )?;
                param(
                    "floor",
                    *floor,
                    *floor > 0.0 && *floor <= 1.0,
                    "must lie in (0, 1]",
                )?;
                base.validate()
            }
            VD::VerticalShift { base, epsilon } => {
                param(
                    "epsilon",
                    *epsilon,
                    *epsilon > 0.0 && *epsilon < 1.0,
                    "must lie in (0, 1)",
                )?;
                base.validate()
            }
        }
    }

    /// Short family tag, matching the serialized `family` field.
    pub fn family_name(&self) -> &'static str {
        match self {
            VD::Uniform => "uniform",
            VD::BetaA1 { .. } => "beta_a1",
            VD::Beta1B { .. } => "beta_1b",
            VD::TruncExp { .. } => "trunc_exp",
            VD::PointMass { .. } => "point_mass",
            VD::GapShifted { .. } => "gap_shifted",
            VD::HorizontalMix { .. } => "horizontal_mix",
            VD::VerticalShift { .. } => "vertical_shift",
        }
    }

    /// Parameters as `key=value` pairs joined by `;`; nested bases in brackets.
    pub fn params_string(&self) -> String {
        match self {
            VD::Uniform => String::new(),
            VD::BetaA1 { a } => format!("a={a}"),
            VD::Beta1B { b } => format!("b={b}"),
            VD::TruncExp { lambda } => format!("lambda={lambda}"),
            VD::PointMass { p } => format!("p={p}"),
            VD::GapShifted { base, gap } => format!("base={};gap={gap}", base.label()),
            VD::HorizontalMix { base, alpha, floor } => {
                format!("base={};alpha={alpha};floor={floor}", base.label())
            }
            VD::VerticalShift { base, epsilon } => {
                format!("base={};epsilon={epsilon}", base.label())
            }
        }
    }

    /// `family[params]`, used as a compact human-readable key.
    pub fn label(&self) -> String {
        let p = self.params_string();
        if p.is_empty() {
            self.family_name().to_string()
        } else {
            format!("{}[{}]", self.family_name(), p)
        }
    }

    /// `D(x) = P(X <= x)`. Total on the real line.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        match self {
            VD::Uniform => x,
            VD::BetaA1 { a } => x.powf(*a),
            VD::Beta1B { b } => -(b * (-x).ln_1p()).exp_m1(),
            VD::TruncExp { lambda } => (-lambda * x).exp_m1() / (-lambda).exp_m1(),
            VD::PointMass { p } => {
                if x >= *p {
                    1.0
                } else {
                    0.0
                }
            }
            VD::GapShifted { base, gap } => {
                if x < *gap {
                    0.0
                } else {
                    base.cdf((x - gap) / (1.0 - gap))
                }
            }
            VD::HorizontalMix { base, alpha, floor } => {
                let step = if x >= *floor { 1.0 } else { 0.0 };
                (1.0 - alpha) * base.cdf(x) + alpha * step
            }
            VD::VerticalShift { base, epsilon } => (base.cdf(x) - epsilon).max(0.0),
        }
    }

    /// Left limit `D(x-) = P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x > 1.0 {
            return 1.0;
        }
        match self {
            VD::Uniform | VD::BetaA1 { .. } | VD::Beta1B { .. } | VD::TruncExp { .. } => {
                self.cdf(x)
            }
            VD::PointMass { p } => {
                if x > *p {
                    1.0
                } else {
                    0.0
                }
            }
            VD::GapShifted { base, gap } => base.cdf_left((x - gap) / (1.0 - gap)),
            VD::HorizontalMix { base, alpha, floor } => {
                let step = if x > *floor { 1.0 } else { 0.0 };
                (1.0 - alpha) * base.cdf_left(x) + alpha * step
            }
            VD::VerticalShift { base, epsilon } => (base.cdf_left(x) - epsilon).max(0.0),
        }
    }

    /// Left quantile `inf{x : D(x) >= u}` for `u` in (0, 1].
    pub fn quantile(&self, u: f64) -> Result<f64, DistributionError> {
        if u > 0.0 && u <= 1.0 {
            Ok(self.quantile_unchecked(u))
        } else {
            Err(DistributionError::QuantileLevel(u))
        }
    }

    /// [`quantile`](Self::quantile) without the range check. `u` must be in (0, 1].
    pub fn quantile_unchecked(&self, u: f64) -> f64 {
        debug_assert!(u > 0.0 && u <= 1.0, "quantile level {u}");
        let q = match self {
            VD::Uniform => u,
            VD::BetaA1 { a } => u.powf(1.0 / a),
            VD::Beta1B { b } => -((-u).ln_1p() / b).exp_m1(),
            VD::TruncExp { lambda } => -(u * (-lambda).exp_m1()).ln_1p() / lambda,
            VD::PointMass { p } => *p,
            VD::GapShifted { base, gap } => gap + (1.0 - gap) * base.quantile_unchecked(u),
            VD::HorizontalMix { base, alpha, floor } => {
                let below = (1.0 - alpha) * base.cdf_left(*floor);
                if u <= below + BRANCH_TOL {
                    // Lower branch is only reached when the base has mass below the floor.
                    let v = (u / (1.0 - alpha)).min(1.0);
                    base.quantile_unchecked(v).min(*floor)
                } else if u <= alpha + below + BRANCH_TOL {
                    *floor
                } else {
                    let v = ((u - alpha) / (1.0 - alpha)).min(1.0);
                    base.quantile_unchecked(v).max(*floor)
                }
            }
            VD::VerticalShift { base, epsilon } => {
                let v = u + epsilon;
                if v > 1.0 {
                    1.0
                } else {
                    base.quantile_unchecked(v)
                }
            }
        };
        q.clamp(0.0, 1.0)
    }

    /// Upper quantile `inf{x : D(x) > u}` for `u` in [0, 1); returns 1 when no
    /// point of [0, 1) exceeds level `u`.
    pub fn upper_quantile(&self, u: f64) -> f64 {
        if u < 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        let q = match self {
            // Strictly increasing on their support.
            VD::Uniform | VD::BetaA1 { .. } | VD::Beta1B { .. } | VD::TruncExp { .. } => {
                if u == 0.0 {
                    0.0
                } else {
                    self.quantile_unchecked(u)
                }
            }
            VD::PointMass { p } => *p,
            VD::GapShifted { base, gap } => gap + (1.0 - gap) * base.upper_quantile(u),
            VD::HorizontalMix { base, alpha, floor } => {
                let v = u / (1.0 - alpha);
                if v < base.cdf_left(*floor) {
                    base.upper_quantile(v)
                } else {
                    base.upper_quantile((u - alpha) / (1.0 - alpha)).max(*floor)
                }
            }
            VD::VerticalShift { base, epsilon } => base.upper_quantile(u + epsilon),
        };
        q.clamp(0.0, 1.0)
    }

    /// One inverse-transform draw.
    #[inline]
    pub fn sample(&self, rng: &mut RandomStream) -> f64 {
        self.quantile_unchecked(rng.uniform())
    }

    /// A draw conditioned on `X <= p`, given `D(p) > 0`.
    #[inline]
    pub fn sample_below(&self, p: f64, rng: &mut RandomStream) -> f64 {
        let mass = self.cdf(p);
        debug_assert!(mass > 0.0);
        self.quantile_unchecked((rng.uniform() * mass).max(f64::MIN_POSITIVE))
            .min(p)
    }

    /// Mass at zero, `D(0)`.
    pub fn atom_at_zero(&self) -> f64 {
        self.cdf(0.0)
    }

    /// Left-tail metadata, derived from the family parameters.
    pub fn tail_profile(&self) -> TailProfile {
        let gap = self.upper_quantile(0.0);
        let atom_at_zero = self.atom_at_zero();
        let class = match self {
            VD::Uniform | VD::Beta1B { .. } | VD::TruncExp { .. } => TailClass::Linear,
            VD::BetaA1 { a } => {
                if *a > 1.0 {
                    TailClass::PolySuper(*a)
                } else if *a < 1.0 {
                    TailClass::PolySub(*a)
                } else {
                    TailClass::Linear
                }
            }
            VD::PointMass { p } => {
                if *p > 0.0 {
                    TailClass::Gap
                } else {
                    TailClass::Atom
                }
            }
            VD::GapShifted { .. } => TailClass::Gap,
            VD::HorizontalMix { base, .. } => {
                let inner = base.tail_profile();
                if gap > 0.0 {
                    TailClass::Gap
                } else {
                    inner.class
                }
            }
            VD::VerticalShift { .. } => {
                if gap > 0.0 {
                    TailClass::Gap
                } else if atom_at_zero > 0.0 {
                    TailClass::Atom
                } else {
                    TailClass::Unknown
                }
            }
        };
        TailProfile {
            gap,
            atom_at_zero,
            class,
        }
    }
}
