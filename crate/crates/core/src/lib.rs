//! Posted-price procurement market simulation.
//!
//! A principal buys one task in each of `M` categories by posting a price and
//! waiting for a worker whose reservation price is at or below it. This crate
//! provides the valuation laws, the stochastic wage suppression (SWS) pricing
//! rule and baselines, an exact simulator with two engines, horizontal and
//! vertical collective-action transforms, and the analysis used to classify
//! how the total cost scales with `M`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod collective;
pub mod distributions;
pub mod experiment;
pub mod market_sim;
pub mod pricing;
pub mod rng;

pub use distributions::{CostRegime, TailClass, TailProfile, ValuationDistribution};
pub use market_sim::{Engine, MarketConfig, SimError, SimulationTrace, TieBreak};
pub use pricing::PricingStrategy;
pub use rng::RandomStream;
