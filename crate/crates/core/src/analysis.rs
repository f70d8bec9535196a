//! Cost oracles, regime classification and run summaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{CostRegime, ValuationDistribution};
use crate::market_sim::{expected_wait_oracle, MarketConfig, SimulationTrace, WaitOracle};
use crate::pricing::PricingStrategy;

/// Top-half relative spread below which a cost sequence is constant.
pub const CONSTANT_SPREAD: f64 = 0.02;
/// Scaling exponents below this are logarithmic.
pub const LOG_EXPONENT: f64 = 0.15;
/// Scaling exponents at or above this are linear.
pub const LINEAR_EXPONENT: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("M values must be positive and strictly increasing")]
    UnorderedGrid,
    #[error("degenerate input: cost {cost} at M = {m} is not positive")]
    DegenerateInput { m: f64, cost: f64 },
    #[error("no traces to summarize")]
    Empty,
}

/// `sum_{j=1}^{m} Q(theta / j)`: the SWS cost for `m` i.i.d. categories.
pub fn analytic_sws_cost(d: &ValuationDistribution, m: usize, theta: f64) -> f64 {
    (1..=m)
        .map(|j| d.quantile_unchecked((theta / j as f64).min(1.0)))
        .sum()
}

pub fn harmonic(m: usize) -> f64 {
    (1..=m).map(|j| 1.0 / j as f64).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else if ss_res <= f64::EPSILON {
        1.0
    } else {
        0.0
    };
    LineFit {
        slope,
        intercept,
        r2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantFit {
    pub level: f64,
    pub max_dev: f64,
    /// `(max - min) / mean`.
    pub relative_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeFit {
    /// `log cost = slope * log M + intercept`.
    pub power_law: LineFit,
    /// `cost = slope * log M + intercept`.
    pub logarithmic: LineFit,
    pub constant: ConstantFit,
    /// Exponent `s` of the finite-difference derivative `dC/dM ~ M^(s-1)`;
    /// `None` when the cost is not increasing across the window.
    pub scaling_exponent: Option<f64>,
    pub regime: CostRegime,
    /// Number of largest-M points the fits use.
    pub points_used: usize,
}

/// Classifies how cost grows with `M`.
///
/// All fits use the upper half of the grid. Constant wins when the relative
/// spread there is under 2%. Otherwise the scaling exponent of the
/// finite-difference derivative decides: under 0.15 is logarithmic, 0.9 and
/// above is linear, anything between is sublinear. Additive lower-order
/// terms (a `log M` next to a linear term, say) flatten the log-log slope of
/// the levels at moderate `M` but barely move the derivative, so the
/// derivative is what separates the regimes. When the costs are not
/// increasing the level slope stands in for it.
pub fn fit_regime(points: &[(f64, f64)]) -> Result<RegimeFit, AnalysisError> {
    if points.len() < 4 {
        return Err(AnalysisError::TooFewPoints {
            needed: 4,
            got: points.len(),
        });
    }
    if points[0].0 <= 0.0 || points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(AnalysisError::UnorderedGrid);
    }
    if let Some(&(m, cost)) = points.iter().find(|p| !(p.1 > 0.0) || !p.1.is_finite()) {
        return Err(AnalysisError::DegenerateInput { m, cost });
    }

    let top = &points[points.len() / 2..];
    let log_m: Vec<f64> = top.iter().map(|p| p.0.ln()).collect();
    let costs: Vec<f64> = top.iter().map(|p| p.1).collect();
    let log_c: Vec<f64> = costs.iter().map(|c| c.ln()).collect();

    let power_law = least_squares(&log_m, &log_c);
    let logarithmic = least_squares(&log_m, &costs);
    let level = costs.iter().sum::<f64>() / costs.len() as f64;
    let max = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let constant = ConstantFit {
        level,
        max_dev: costs.iter().map(|c| (c - level).abs()).fold(0.0, f64::max),
        relative_spread: (max - min) / level,
    };

    let window = &points[points.len().saturating_sub(top.len().max(3))..];
    let scaling_exponent = derivative_exponent(window);

    let regime = if constant.relative_spread < CONSTANT_SPREAD {
        CostRegime::Constant
    } else {
        let s = scaling_exponent.unwrap_or(power_law.slope);
        if s < LOG_EXPONENT {
            CostRegime::Log
        } else if s < LINEAR_EXPONENT {
            CostRegime::Sublinear(s)
        } else {
            CostRegime::Linear
        }
    };

    Ok(RegimeFit {
        power_law,
        logarithmic,
        constant,
        scaling_exponent,
        regime,
        points_used: top.len(),
    })
}

fn derivative_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for w in points.windows(2) {
        let (m0, c0) = w[0];
        let (m1, c1) = w[1];
        let slope = (c1 - c0) / (m1 - m0);
        if !(slope > 0.0) {
            return None;
        }
        xs.push((m0 * m1).sqrt().ln());
        ys.push(slope.ln());
    }
    if xs.len() < 2 {
        return None;
    }
    Some(1.0 + least_squares(&xs, &ys).slope)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralVerdict {
    pub finite: bool,
    /// The integral when finite; the partial integral (a lower bound) otherwise.
    pub value: f64,
    /// Integral over each dyadic piece `[theta / 2^k, theta / 2^(k-1)]`.
    pub increments: Vec<f64>,
}

pub const DYADIC_PIECES: usize = 40;
const DECAY_WINDOW: usize = 10;
const DECAY_RATIO: f64 = 0.9;

/// Decides whether `∫_0^theta qmax(u) / u^2 du` is finite, which holds
/// exactly when the SWS cost stays bounded in `M`.
///
/// Integrates over the dyadic pieces `[theta/2^k, theta/2^(k-1)]` for
/// `k = 1..=40` and calls the integral finite when each of the last ten
/// pieces is below 0.9 times its predecessor.
pub fn o1_integral_criterion<F: Fn(f64) -> f64>(qmax: F, theta: f64) -> IntegralVerdict {
    let f = |u: f64| qmax(u) / (u * u);
    let mut increments = Vec::with_capacity(DYADIC_PIECES);
    let mut hi = theta;
    for _ in 0..DYADIC_PIECES {
        let lo = 0.5 * hi;
        increments.push(adaptive_simpson(
            &f,
            lo,
            hi,
            1e-12 * (1.0 + f(hi).abs() * (hi - lo)),
            30,
        ));
        hi = lo;
    }
    let value = increments.iter().sum();
    let tail = &increments[DYADIC_PIECES - DECAY_WINDOW - 1..];
    let finite = tail.windows(2).all(|w| {
        if w[0] == 0.0 {
            w[1] == 0.0
        } else {
            w[1] / w[0] < DECAY_RATIO
        }
    });
    IntegralVerdict {
        finite,
        value,
        increments,
    }
}

/// The criterion applied to an i.i.d. category law.
pub fn o1_verdict_for(d: &ValuationDistribution, theta: f64) -> IntegralVerdict {
    o1_integral_criterion(|u| d.quantile_unchecked(u.min(1.0)), theta)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let c = 0.5 * (a + b);
    let (fa, fb, fc) = (f(a), f(b), f(c));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_step(f, a, b, fa, fb, fc, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let (d, e) = (0.5 * (a + c), 0.5 * (c + b));
    let (fd, fe) = (f(d), f(e));
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, c, fa, fc, fd, left, 0.5 * tol, depth - 1)
            + simpson_step(f, c, b, fc, fb, fe, right, 0.5 * tol, depth - 1)
    }
}

/// Sample mean and unbiased standard deviation. A single value has std 0.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Labels carried into a [`RunSummary`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryMeta {
    pub family: String,
    pub alpha: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub m: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub family: String,
    pub n_runs: usize,
    pub cost_mean: f64,
    pub cost_std: f64,
    pub wait_mean: f64,
    pub wait_std: f64,
    pub analytic_cost: Option<f64>,
    pub analytic_wait: Option<WaitOracle>,
}

/// Aggregates replicated runs of one market. Analytic oracles are attached
/// when every category shares one law.
pub fn summarize(
    traces: &[SimulationTrace],
    cfg: &MarketConfig,
    meta: &SummaryMeta,
) -> Result<RunSummary, AnalysisError> {
    if traces.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let costs: Vec<f64> = traces.iter().map(|t| t.total_cost).collect();
    let waits: Vec<f64> = traces.iter().map(|t| t.total_wait as f64).collect();
    let (cost_mean, cost_std) = mean_std(&costs);
    let (wait_mean, wait_std) = mean_std(&waits);
    let (analytic_cost, analytic_wait) = if cfg.is_iid() {
        let cost = match cfg.strategy {
            PricingStrategy::Sws { theta } => {
                Some(analytic_sws_cost(&cfg.distributions[0], cfg.m(), theta))
            }
            PricingStrategy::Fixed { p } => Some(p * cfg.m() as f64),
            PricingStrategy::SuccessFloorOptimal { .. } => None,
        };
        (cost, expected_wait_oracle(cfg).ok())
    } else {
        (None, None)
    };
    Ok(RunSummary {
        m: cfg.m(),
        alpha: meta.alpha,
        epsilon: meta.epsilon,
        family: meta.family.clone(),
        n_runs: traces.len(),
        cost_mean,
        cost_std,
        wait_mean,
        wait_std,
        analytic_cost,
        analytic_wait,
    })
}
