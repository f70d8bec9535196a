//! Posted-price rules.
//!
//! A strategy maps the active categories at an iteration to the single price
//! posted for all of them. Active sets are passed either as a flat slice of
//! laws or grouped as `(law, multiplicity)` pairs; the grouped form lets
//! i.i.d. markets price in O(1) per iteration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::ValuationDistribution;

/// Fixed number of bisection steps for [`PricingStrategy::SuccessFloorOptimal`].
pub const BISECTION_STEPS: usize = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    #[error("active set is empty")]
    EmptyActiveSet,
    #[error("success probability {target} is unreachable even at price 1 (max {reached})")]
    Unreachable { target: f64, reached: f64 },
    #[error("invalid strategy parameter `{name}` = {value}")]
    Parameter { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case", deny_unknown_fields)]
pub enum PricingStrategy {
    /// Stochastic wage suppression: the highest `theta / |A_t|` quantile
    /// among active categories.
    Sws {
        theta: f64,
    },
    Fixed {
        p: f64,
    },
    /// Cheapest price whose one-arrival success probability reaches
    /// `q_target`, given full knowledge of the active laws.
    SuccessFloorOptimal {
        q_target: f64,
    },
}

/// One group of exchangeable active categories.
pub type ActiveGroup<'a> = (&'a ValuationDistribution, usize);

impl PricingStrategy {
    pub fn sws(theta: f64) -> Result<Self, PricingError> {
        let s = PricingStrategy::Sws { theta };
        s.validate()?;
        Ok(s)
    }

    pub fn fixed(p: f64) -> Result<Self, PricingError> {
        let s = PricingStrategy::Fixed { p };
        s.validate()?;
        Ok(s)
    }

    pub fn success_floor_optimal(q_target: f64) -> Result<Self, PricingError> {
        let s = PricingStrategy::SuccessFloorOptimal { q_target };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), PricingError> {
        let (name, value, ok) = match *self {
            PricingStrategy::Sws { theta } => ("theta", theta, theta > 0.0 && theta <= 1.0),
            PricingStrategy::Fixed { p } => ("p", p, (0.0..=1.0).contains(&p)),
            PricingStrategy::SuccessFloorOptimal { q_target } => {
                ("q_target", q_target, q_target > 0.0 && q_target < 1.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(PricingError::Parameter { name, value })
        }
    }

    /// Price for a flat active set.
    pub fn post_price(&self, active: &[ValuationDistribution]) -> Result<f64, PricingError> {
        let groups: Vec<ActiveGroup<'_>> = active.iter().map(|d| (d, 1)).collect();
        self.post_price_grouped(&groups)
    }

    /// Price for an active set given as `(law, multiplicity)` groups.
    /// Groups with multiplicity zero are ignored.
    pub fn post_price_grouped(&self, groups: &[ActiveGroup<'_>]) -> Result<f64, PricingError> {
        let n: usize = groups.iter().map(|g| g.1).sum();
        if n == 0 {
            return Err(PricingError::EmptyActiveSet);
        }
        match *self {
            PricingStrategy::Sws { theta } => {
                let level = (theta / n as f64).min(1.0);
                Ok(groups
                    .iter()
                    .filter(|g| g.1 > 0)
                    .map(|(d, _)| d.quantile_unchecked(level))
                    .fold(0.0, f64::max))
            }
            PricingStrategy::Fixed { p } => Ok(p),
            PricingStrategy::SuccessFloorOptimal { q_target } => {
                let reached = success_probability_grouped(1.0, groups);
                if reached < q_target {
                    return Err(PricingError::Unreachable {
                        target: q_target,
                        reached,
                    });
                }
                if success_probability_grouped(0.0, groups) >= q_target {
                    return Ok(0.0);
                }
                let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
                for _ in 0..BISECTION_STEPS {
                    let mid = 0.5 * (lo + hi);
                    if success_probability_grouped(mid, groups) >= q_target {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                Ok(hi)
            }
        }
    }
}

/// Probability that one arriving worker accepts at least one active category
/// at price `p`: `1 - prod(1 - D_i(p))`.
pub fn success_probability(p: f64, active: &[ValuationDistribution]) -> f64 {
    let groups: Vec<ActiveGroup<'_>> = active.iter().map(|d| (d, 1)).collect();
    success_probability_grouped(p, &groups)
}

pub fn success_probability_grouped(p: f64, groups: &[ActiveGroup<'_>]) -> f64 {
    let mut log_miss = 0.0;
    for &(d, count) in groups {
        if count == 0 {
            continue;
        }
        let accept = d.cdf(p);
        if accept >= 1.0 {
            return 1.0;
        }
        log_miss += count as f64 * (-accept).ln_1p();
    }
    -log_miss.exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ValuationDistribution as VD;
    use proptest::prelude::*;

    fn uniforms(n: usize) -> Vec<VD> {
        vec![VD::uniform(); n]
    }

    #[test]
    fn sws_examples() {
        let s = PricingStrategy::sws(1.0).unwrap();
        assert!((s.post_price(&uniforms(3)).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.post_price(&uniforms(1)).unwrap(), 1.0);
        assert_eq!(s.post_price(&uniforms(2)).unwrap(), 0.5);
    }

    #[test]
    fn sws_takes_max_quantile_over_heterogeneous_set() {
        let s = PricingStrategy::sws(1.0).unwrap();
        let active = vec![VD::uniform(), VD::beta_a1(2.0).unwrap()];
        // max(0.5, sqrt(0.5))
        assert!((s.post_price(&active).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn success_floor_optimal_examples() {
        let s = PricingStrategy::success_floor_optimal(0.75).unwrap();
        assert!((s.post_price(&uniforms(2)).unwrap() - 0.5).abs() < 1e-10);
        let s = PricingStrategy::success_floor_optimal(0.5).unwrap();
        assert!((s.post_price(&uniforms(1)).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn success_floor_optimal_at_point_masses() {
        // D(1) = 1 for every law, so the target is always reachable; the
        // cheapest price for point masses is the smallest mass location.
        let s = PricingStrategy::success_floor_optimal(0.99).unwrap();
        let active = vec![VD::point_mass(1.0).unwrap(), VD::point_mass(0.6).unwrap()];
        assert!((s.post_price(&active).unwrap() - 0.6).abs() < 1e-10);
        let s = PricingStrategy::success_floor_optimal(0.5).unwrap();
        assert_eq!(s.post_price(&[VD::point_mass(0.0).unwrap()]).unwrap(), 0.0);
    }

    #[test]
    fn empty_active_set_rejected() {
        for s in [
            PricingStrategy::sws(1.0).unwrap(),
            PricingStrategy::fixed(0.3).unwrap(),
        ] {
            assert_eq!(s.post_price(&[]), Err(PricingError::EmptyActiveSet));
        }
    }

    #[test]
    fn invalid_strategy_parameters() {
        assert!(PricingStrategy::sws(0.0).is_err());
        assert!(PricingStrategy::sws(1.5).is_err());
        assert!(PricingStrategy::fixed(-0.1).is_err());
        assert!(PricingStrategy::success_floor_optimal(1.0).is_err());
    }

    #[test]
    fn success_probability_examples() {
        let q = success_probability(1.0 / 3.0, &uniforms(3));
        assert!((q - 19.0 / 27.0).abs() < 1e-15);
        assert_eq!(
            success_probability(0.4, &[VD::point_mass(0.5).unwrap()]),
            0.0
        );
        let certain = vec![VD::uniform(), VD::point_mass(0.2).unwrap()];
        assert_eq!(success_probability(0.3, &certain), 1.0);
    }

    #[test]
    fn grouped_and_flat_agree() {
        let b = VD::beta_a1(2.0).unwrap();
        let flat = vec![VD::uniform(), VD::uniform(), b.clone(), VD::uniform()];
        let grouped = [(&VD::Uniform, 3), (&b, 1)];
        for p in [0.0, 0.1, 0.5, 0.9] {
            let a = success_probability(p, &flat);
            let g = success_probability_grouped(p, &grouped);
            assert!((a - g).abs() < 1e-15);
        }
        let s = PricingStrategy::sws(0.7).unwrap();
        assert_eq!(
            s.post_price(&flat).unwrap(),
            s.post_price_grouped(&grouped).unwrap()
        );
    }

    fn family(idx: usize) -> VD {
        match idx {
            0 => VD::uniform(),
            1 => VD::beta_a1(0.5).unwrap(),
            2 => VD::beta_a1(2.0).unwrap(),
            3 => VD::trunc_exp(3.0).unwrap(),
            4 => VD::beta_1b(0.5).unwrap(),
            5 => VD::point_mass(0.5).unwrap(),
            6 => VD::gap_shifted(VD::uniform(), 0.2).unwrap(),
            7 => VD::horizontal_mix(VD::uniform(), 0.5, 0.2).unwrap(),
            8 => VD::vertical_shift(VD::uniform(), 0.01).unwrap(),
            _ => VD::horizontal_mix(VD::point_mass(0.0).unwrap(), 0.7, 0.5).unwrap(),
        }
    }

    #[test]
    fn sws_success_floor_every_family_and_size() {
        let s = PricingStrategy::sws(1.0).unwrap();
        let floor = 1.0 - (-1.0f64).exp();
        for idx in 0..10 {
            let d = family(idx);
            for n in 1..=200 {
                let groups = [(&d, n)];
                let p = s.post_price_grouped(&groups).unwrap();
                let q = success_probability_grouped(p, &groups);
                assert!(q >= floor - 1e-12, "{} n={n}: {q}", d.label());
            }
        }
    }

    #[test]
    fn success_floor_optimal_is_the_exact_minimum_under_iid() {
        // Minimum price with 1-(1-D(p))^n >= 1-e^{-theta} is Q(1-e^{-theta/n}),
        // which never exceeds the SWS price Q(theta/n).
        for theta in [0.5f64, 1.0] {
            let target = 1.0 - (-theta).exp();
            let opt = PricingStrategy::success_floor_optimal(target).unwrap();
            let sws = PricingStrategy::sws(theta).unwrap();
            for idx in [0, 1, 2, 3, 4, 6] {
                let d = family(idx);
                for n in [1usize, 2, 3, 10, 50, 200] {
                    let groups = [(&d, n)];
                    let p_opt = opt.post_price_grouped(&groups).unwrap();
                    let p_sws = sws.post_price_grouped(&groups).unwrap();
                    let closed = d.quantile(-(-theta / n as f64).exp_m1()).unwrap();
                    assert!(p_opt <= p_sws + 1e-10, "{} n={n}", d.label());
                    assert!(
                        (p_opt - closed).abs() < 1e-8,
                        "{} n={n}: {p_opt} vs {closed}",
                        d.label()
                    );
                }
            }
        }
    }

    proptest! {
        #[test]
        fn sws_price_nonincreasing_in_active_size(idx in 0usize..10, n in 1usize..500, theta in 0.05f64..=1.0) {
            let d = family(idx);
            let s = PricingStrategy::sws(theta).unwrap();
            let bigger = s.post_price_grouped(&[(&d, n + 1)]).unwrap();
            let smaller = s.post_price_grouped(&[(&d, n)]).unwrap();
            prop_assert!(bigger <= smaller);
        }

        #[test]
        fn success_probability_in_unit_interval(idx in 0usize..10, n in 1usize..50, p in 0.0f64..=1.0) {
            let d = family(idx);
            let q = success_probability_grouped(p, &[(&d, n)]);
            prop_assert!((0.0..=1.0).contains(&q));
        }
    }
}
