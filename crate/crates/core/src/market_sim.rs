//! The sequential-arrival market.
//!
//! At iteration `t` the principal posts one price for all active categories.
//! Workers arrive one at a time, each with an independent valuation per
//! category; the first worker with at least one valuation at or below the
//! price completes one such category, which is then removed. `N_t` counts the
//! arrivals at iteration `t`, including the successful one.
//!
//! Two engines produce traces with the same law:
//!
//! * [`Engine::Direct`] draws every arriving worker's full valuation vector.
//! * [`Engine::GeometricJump`] draws `N_t ~ Geometric(q_t)` by inversion and
//!   then the successful worker's acceptance set conditioned on being
//!   nonempty. Categories with identical laws are handled as one group, so an
//!   i.i.d. market costs O(1) random draws per iteration.

use std::io::Write;

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{DistributionError, ValuationDistribution};
use crate::pricing::{success_probability_grouped, ActiveGroup, PricingError, PricingStrategy};
use crate::rng::RandomStream;

pub const DEFAULT_WAIT_CAP: u64 = 100_000_000;

/// Largest heterogeneous market for which wait bounds enumerate every subset.
const ENUMERATION_LIMIT: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("zero success probability at iteration {t} (price {price})")]
    ZeroSuccessProbability { t: usize, price: f64 },
    #[error("wait at iteration {t} exceeds cap {cap}")]
    WaitCapExceeded { t: usize, cap: u64 },
    #[error("invalid market config: {0}")]
    Config(String),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Direct,
    #[default]
    #[serde(alias = "geometric")]
    GeometricJump,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::Direct => "direct",
            Engine::GeometricJump => "geometric",
        }
    }
}

/// Which category a worker completes when several are acceptable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    #[serde(alias = "uniform")]
    UniformAmongAccepting,
    LowestIndex,
    /// Largest `price - valuation`; lowest index on ties.
    MaxMargin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    /// One law per category; `M` is the length.
    pub distributions: Vec<ValuationDistribution>,
    pub strategy: PricingStrategy,
    #[serde(default)]
    pub tie_break: TieBreak,
    #[serde(default = "default_wait_cap")]
    pub wait_cap: u64,
    #[serde(default)]
    pub engine: Engine,
}

fn default_wait_cap() -> u64 {
    DEFAULT_WAIT_CAP
}

impl MarketConfig {
    pub fn new(distributions: Vec<ValuationDistribution>, strategy: PricingStrategy) -> Self {
        Self {
            distributions,
            strategy,
            tie_break: TieBreak::default(),
            wait_cap: DEFAULT_WAIT_CAP,
            engine: Engine::default(),
        }
    }

    /// `m` categories sharing one law.
    pub fn iid(d: ValuationDistribution, m: usize, strategy: PricingStrategy) -> Self {
        Self::new(vec![d; m], strategy)
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Self {
        self.tie_break = tie_break;
        self
    }

    pub fn with_wait_cap(mut self, wait_cap: u64) -> Self {
        self.wait_cap = wait_cap;
        self
    }

    pub fn m(&self) -> usize {
        self.distributions.len()
    }

    pub fn is_iid(&self) -> bool {
        self.distributions.windows(2).all(|w| w[0] == w[1])
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.distributions.is_empty() {
            return Err(SimError::Config("at least one category is required".into()));
        }
        if self.wait_cap < self.m() as u64 {
            return Err(SimError::Config(format!(
                "wait_cap {} is below the number of categories {}",
                self.wait_cap,
                self.m()
            )));
        }
        for d in &self.distributions {
            d.validate()?;
        }
        self.strategy.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based iteration index.
    pub t: usize,
    pub active_size: usize,
    pub price: f64,
    pub wait: u64,
    /// 0-based category index.
    pub completed_category: usize,
    /// Analytic one-arrival success probability at `price`.
    pub success_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub iterations: Vec<IterationRecord>,
    pub total_wait: u64,
    pub total_cost: f64,
}

impl SimulationTrace {
    pub fn min_success_prob(&self) -> f64 {
        self.iterations
            .iter()
            .map(|r| r.success_prob)
            .fold(f64::INFINITY, f64::min)
    }

    /// Category indices in completion order.
    pub fn completion_order(&self) -> Vec<usize> {
        self.iterations
            .iter()
            .map(|r| r.completed_category)
            .collect()
    }
}

/// Active categories, grouped by identical law.
struct ActiveState<'a> {
    laws: Vec<&'a ValuationDistribution>,
    law_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    slot: Vec<usize>,
    /// Ascending category indices.
    active: Vec<usize>,
}

impl<'a> ActiveState<'a> {
    fn new(distributions: &'a [ValuationDistribution]) -> Self {
        let mut laws: Vec<&ValuationDistribution> = Vec::new();
        let mut law_of = Vec::with_capacity(distributions.len());
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut slot = Vec::with_capacity(distributions.len());
        for (i, d) in distributions.iter().enumerate() {
            let k = match laws.iter().position(|l| *l == d) {
                Some(k) => k,
                None => {
                    laws.push(d);
                    members.push(Vec::new());
                    laws.len() - 1
                }
            };
            law_of.push(k);
            slot.push(members[k].len());
            members[k].push(i);
        }
        Self {
            laws,
            law_of,
            members,
            slot,
            active: (0..distributions.len()).collect(),
        }
    }

    fn groups(&self, out: &mut Vec<ActiveGroup<'a>>) {
        out.clear();
        out.extend(
            self.laws
                .iter()
                .zip(&self.members)
                .filter(|(_, m)| !m.is_empty())
                .map(|(l, m)| (*l, m.len())),
        );
    }

    fn remove(&mut self, category: usize) {
        let k = self.law_of[category];
        let s = self.slot[category];
        let group = &mut self.members[k];
        group.swap_remove(s);
        if let Some(&moved) = group.get(s) {
            self.slot[moved] = s;
        }
        let pos = self
            .active
            .binary_search(&category)
            .expect("removed category must be active");
        self.active.remove(pos);
    }
}

/// Runs the market to completion.
pub fn run(cfg: &MarketConfig, rng: &mut RandomStream) -> Result<SimulationTrace, SimError> {
    cfg.validate()?;
    let m = cfg.m();
    let mut state = ActiveState::new(&cfg.distributions);
    let mut groups = Vec::new();
    let mut scratch = Scratch::default();
    let mut iterations = Vec::with_capacity(m);
    let mut total_wait = 0u64;
    let mut total_cost = 0.0;

    for t in 1..=m {
        let active_size = state.active.len();
        debug_assert_eq!(active_size, m - t + 1);
        state.groups(&mut groups);
        let price = cfg.strategy.post_price_grouped(&groups)?;
        let q = success_probability_grouped(price, &groups);
        if !(q > 0.0) {
            return Err(SimError::ZeroSuccessProbability { t, price });
        }
        let (wait, chosen) = match cfg.engine {
            Engine::Direct => direct_iteration(cfg, &state, price, t, rng, &mut scratch)?,
            Engine::GeometricJump => {
                let wait = geometric(q, rng);
                if wait > cfg.wait_cap as f64 {
                    return Err(SimError::WaitCapExceeded {
                        t,
                        cap: cfg.wait_cap,
                    });
                }
                let chosen = match cfg.tie_break {
                    TieBreak::UniformAmongAccepting => grouped_uniform_choice(&state, price, rng),
                    _ => sequential_choice(cfg, &state, price, rng, &mut scratch),
                };
                (wait as u64, chosen)
            }
        };
        state.remove(chosen);
        total_wait += wait;
        total_cost += price;
        iterations.push(IterationRecord {
            t,
            active_size,
            price,
            wait,
            completed_category: chosen,
            success_prob: q,
        });
    }

    Ok(SimulationTrace {
        iterations,
        total_wait,
        total_cost,
    })
}

#[derive(Default)]
struct Scratch {
    accepting: Vec<(usize, f64)>,
    accept_prob: Vec<f64>,
    suffix_log_miss: Vec<f64>,
}

fn direct_iteration(
    cfg: &MarketConfig,
    state: &ActiveState<'_>,
    price: f64,
    t: usize,
    rng: &mut RandomStream,
    scratch: &mut Scratch,
) -> Result<(u64, usize), SimError> {
    let mut wait = 0u64;
    loop {
        wait += 1;
        if wait > cfg.wait_cap {
            return Err(SimError::WaitCapExceeded {
                t,
                cap: cfg.wait_cap,
            });
        }
        scratch.accepting.clear();
        for &i in &state.active {
            let v = cfg.distributions[i].sample(rng);
            if v <= price {
                scratch.accepting.push((i, v));
            }
        }
        if !scratch.accepting.is_empty() {
            return Ok((wait, pick(cfg.tie_break, &scratch.accepting, rng)));
        }
    }
}

/// Chooses among `(category, valuation)` pairs listed in ascending category order.
fn pick(tie_break: TieBreak, accepting: &[(usize, f64)], rng: &mut RandomStream) -> usize {
    match tie_break {
        TieBreak::UniformAmongAccepting => accepting[rng.index(accepting.len())].0,
        TieBreak::LowestIndex => accepting[0].0,
        TieBreak::MaxMargin => {
            let mut best = accepting[0];
            for &(i, v) in &accepting[1..] {
                if v < best.1 {
                    best = (i, v);
                }
            }
            best.0
        }
    }
}

/// `Geometric(q)` on {1, 2, ...} by inversion, as a float so callers can
/// compare against a cap before converting.
pub fn geometric(q: f64, rng: &mut RandomStream) -> f64 {
    if q >= 1.0 {
        return 1.0;
    }
    let u = rng.uniform();
    (u.ln() / (-q).ln_1p()).ceil().max(1.0)
}

/// Accepting set of the successful worker, drawn one category at a time in
/// ascending index order: each category accepts with its probability
/// conditioned on at least one acceptance among itself and those after it,
/// until the first acceptance, and unconditionally afterwards.
fn sequential_choice(
    cfg: &MarketConfig,
    state: &ActiveState<'_>,
    price: f64,
    rng: &mut RandomStream,
    scratch: &mut Scratch,
) -> usize {
    let n = state.active.len();
    scratch.accept_prob.clear();
    scratch.accept_prob.extend(
        state
            .active
            .iter()
            .map(|&i| cfg.distributions[i].cdf(price)),
    );
    scratch.suffix_log_miss.clear();
    scratch.suffix_log_miss.resize(n + 1, 0.0);
    for j in (0..n).rev() {
        scratch.suffix_log_miss[j] =
            scratch.suffix_log_miss[j + 1] + (-scratch.accept_prob[j]).ln_1p();
    }
    let last_possible = scratch
        .accept_prob
        .iter()
        .rposition(|&d| d > 0.0)
        .expect("positive success probability");

    scratch.accepting.clear();
    for j in 0..n {
        let d = scratch.accept_prob[j];
        let accepted = if scratch.accepting.is_empty() {
            if j == last_possible {
                true
            } else {
                let cond = (d / -scratch.suffix_log_miss[j].exp_m1()).min(1.0);
                rng.uniform() <= cond
            }
        } else {
            d > 0.0 && rng.uniform() <= d
        };
        if accepted {
            let i = state.active[j];
            match cfg.tie_break {
                TieBreak::LowestIndex => return i,
                TieBreak::MaxMargin => {
                    let v = cfg.distributions[i].sample_below(price, rng);
                    scratch.accepting.push((i, v));
                }
                TieBreak::UniformAmongAccepting => scratch.accepting.push((i, 0.0)),
            }
        }
    }
    pick(cfg.tie_break, &scratch.accepting, rng)
}

/// Uniform choice among the successful worker's accepting categories, drawing
/// only the number of acceptances in each group of identical laws.
fn grouped_uniform_choice(state: &ActiveState<'_>, price: f64, rng: &mut RandomStream) -> usize {
    let live: Vec<(usize, usize, f64)> = state
        .members
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(k, m)| (k, m.len(), state.laws[k].cdf(price)))
        .collect();
    let g = live.len();
    let mut suffix = vec![0.0; g + 1];
    for j in (0..g).rev() {
        let (_, c, d) = live[j];
        suffix[j] = suffix[j + 1] + c as f64 * (-d).ln_1p();
    }
    let last_possible = live
        .iter()
        .rposition(|&(_, _, d)| d > 0.0)
        .expect("positive success probability");

    let mut counts = vec![0u64; g];
    let mut found = false;
    for j in 0..g {
        let (_, c, d) = live[j];
        if d <= 0.0 {
            continue;
        }
        if found {
            counts[j] = binomial(c as u64, d, rng);
            continue;
        }
        let any_here = -(c as f64 * (-d).ln_1p()).exp_m1();
        let hit = j == last_possible || rng.uniform() <= (any_here / -suffix[j].exp_m1()).min(1.0);
        if hit {
            // First acceptance position within the group, given at least one.
            let first = if d >= 1.0 {
                1
            } else {
                let u = rng.uniform();
                ((-u * any_here).ln_1p() / (-d).ln_1p())
                    .ceil()
                    .clamp(1.0, c as f64) as u64
            };
            counts[j] = 1 + binomial(c as u64 - first, d, rng);
            found = true;
        }
    }

    let total: u64 = counts.iter().sum();
    let mut r = rng.index(total as usize) as u64;
    for (j, &k) in counts.iter().enumerate() {
        if r < k {
            let group = &state.members[live[j].0];
            return group[rng.index(group.len())];
        }
        r -= k;
    }
    unreachable!("acceptance counts sum to total")
}

fn binomial(n: u64, p: f64, rng: &mut RandomStream) -> u64 {
    if n == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("valid binomial").sample(rng)
    }
}

/// Analytic bounds on the expected total wait, `sum_t 1 / q_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaitOracle {
    pub lower: f64,
    pub upper: f64,
    /// `sum_t (1 - q_t) / q_t^2`, when the per-iteration `q_t` are deterministic.
    pub variance: Option<f64>,
}

impl WaitOracle {
    /// The exact expectation, when the bounds coincide.
    pub fn exact(&self) -> Option<f64> {
        (self.lower == self.upper).then_some(self.lower)
    }
}

/// Expected total wait.
///
/// Exact when every category shares one law. Otherwise the removal order
/// changes later `q_t`, and the result brackets the expectation by the
/// smallest and largest `1 / q` over active sets of each size.
pub fn expected_wait_oracle(cfg: &MarketConfig) -> Result<WaitOracle, SimError> {
    cfg.validate()?;
    let m = cfg.m();
    if cfg.is_iid() {
        let d = &cfg.distributions[0];
        let (mut mean, mut var) = (0.0, 0.0);
        for t in 1..=m {
            let groups = [(d, m - t + 1)];
            let price = cfg.strategy.post_price_grouped(&groups)?;
            let q = success_probability_grouped(price, &groups);
            if !(q > 0.0) {
                return Err(SimError::ZeroSuccessProbability { t, price });
            }
            mean += 1.0 / q;
            var += (1.0 - q) / (q * q);
        }
        return Ok(WaitOracle {
            lower: mean,
            upper: mean,
            variance: Some(var),
        });
    }

    if let PricingStrategy::Fixed { p } = cfg.strategy {
        let mut accept: Vec<f64> = cfg.distributions.iter().map(|d| d.cdf(p)).collect();
        accept.sort_by(f64::total_cmp);
        let q_of = |xs: &[f64]| -> f64 { -xs.iter().map(|d| (-d).ln_1p()).sum::<f64>().exp_m1() };
        let (mut lower, mut upper) = (0.0, 0.0);
        for n in 1..=m {
            let q_min = q_of(&accept[..n]);
            let q_max = q_of(&accept[m - n..]);
            if !(q_min > 0.0) {
                return Err(SimError::ZeroSuccessProbability {
                    t: m - n + 1,
                    price: p,
                });
            }
            lower += 1.0 / q_max;
            upper += 1.0 / q_min;
        }
        return Ok(WaitOracle {
            lower,
            upper,
            variance: None,
        });
    }

    if m <= ENUMERATION_LIMIT {
        let mut best = vec![f64::INFINITY; m + 1];
        let mut worst = vec![0.0_f64; m + 1];
        for mask in 1u32..(1u32 << m) {
            let groups: Vec<ActiveGroup<'_>> = (0..m)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| (&cfg.distributions[i], 1))
                .collect();
            let n = groups.len();
            let price = cfg.strategy.post_price_grouped(&groups)?;
            let q = success_probability_grouped(price, &groups);
            if !(q > 0.0) {
                return Err(SimError::ZeroSuccessProbability {
                    t: m - n + 1,
                    price,
                });
            }
            best[n] = best[n].min(1.0 / q);
            worst[n] = worst[n].max(1.0 / q);
        }
        return Ok(WaitOracle {
            lower: best[1..].iter().sum(),
            upper: worst[1..].iter().sum(),
            variance: None,
        });
    }

    let q_floor = match cfg.strategy {
        PricingStrategy::Sws { theta } => -(-theta).exp_m1(),
        PricingStrategy::SuccessFloorOptimal { q_target } => q_target,
        PricingStrategy::Fixed { .. } => unreachable!("handled above"),
    };
    Ok(WaitOracle {
        lower: m as f64,
        upper: m as f64 / q_floor,
        variance: None,
    })
}

pub const TRACE_HEADER: [&str; 6] = [
    "run_id",
    "t",
    "active_size",
    "price",
    "wait",
    "completed_category",
];

/// One row per iteration, then a summary row with `t = total`,
/// `price = total_cost` and `wait = total_wait`.
pub fn write_trace_csv<W: Write>(
    writer: &mut csv::Writer<W>,
    run_id: u64,
    trace: &SimulationTrace,
) -> csv::Result<()> {
    let id = run_id.to_string();
    for r in &trace.iterations {
        writer.write_record([
            id.as_str(),
            &r.t.to_string(),
            &r.active_size.to_string(),
            &r.price.to_string(),
            &r.wait.to_string(),
            &r.completed_category.to_string(),
        ])?;
    }
    writer.write_record([
        id.as_str(),
        "total",
        "",
        &trace.total_cost.to_string(),
        &trace.total_wait.to_string(),
        "",
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ValuationDistribution as VD;

    fn check_well_formed(cfg: &MarketConfig, trace: &SimulationTrace) {
        let m = cfg.m();
        assert_eq!(trace.iterations.len(), m);
        let mut seen = vec![false; m];
        let mut wait = 0;
        let mut cost = 0.0;
        for (k, r) in trace.iterations.iter().enumerate() {
            assert_eq!(r.t, k + 1);
            assert_eq!(r.active_size, m - k);
            assert!(r.wait >= 1);
            assert!(!seen[r.completed_category]);
            seen[r.completed_category] = true;
            wait += r.wait;
            cost += r.price;
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(trace.total_wait, wait);
        assert_eq!(trace.total_cost, cost);
    }

    #[test]
    fn point_mass_at_price_completes_immediately() {
        for engine in [Engine::Direct, Engine::GeometricJump] {
            let cfg = MarketConfig::iid(
                VD::point_mass(0.5).unwrap(),
                3,
                PricingStrategy::fixed(0.5).unwrap(),
            )
            .with_engine(engine);
            let trace = run(&cfg, &mut RandomStream::from_seed(1)).unwrap();
            assert!(trace.iterations.iter().all(|r| r.wait == 1));
            assert_eq!(trace.total_wait, 3);
            assert_eq!(trace.total_cost, 1.5);
        }
    }

    #[test]
    fn price_below_point_mass_is_an_error() {
        for engine in [Engine::Direct, Engine::GeometricJump] {
            let cfg = MarketConfig::iid(
                VD::point_mass(0.5).unwrap(),
                3,
                PricingStrategy::fixed(0.4).unwrap(),
            )
            .with_engine(engine);
            let err = run(&cfg, &mut RandomStream::from_seed(1)).unwrap_err();
            assert_eq!(err, SimError::ZeroSuccessProbability { t: 1, price: 0.4 });
        }
    }

    #[test]
    fn wait_cap_exceeded() {
        // q = 1 - 0.99^2 at price 0.01; a cap of 2 fails quickly.
        for engine in [Engine::Direct, Engine::GeometricJump] {
            let cfg = MarketConfig::iid(VD::uniform(), 2, PricingStrategy::fixed(0.01).unwrap())
                .with_engine(engine)
                .with_wait_cap(2);
            let mut failures = 0;
            for seed in 0..50 {
                match run(&cfg, &mut RandomStream::from_seed(seed)) {
                    Err(SimError::WaitCapExceeded { cap: 2, .. }) => failures += 1,
                    Ok(_) => {}
                    Err(e) => panic!("unexpected {e}"),
                }
            }
            assert!(failures > 40);
        }
    }

    #[test]
    fn config_validation() {
        let s = PricingStrategy::sws(1.0).unwrap();
        assert!(matches!(
            run(
                &MarketConfig::new(vec![], s),
                &mut RandomStream::from_seed(0)
            ),
            Err(SimError::Config(_))
        ));
        let cfg = MarketConfig::iid(VD::uniform(), 5, s).with_wait_cap(4);
        assert!(matches!(cfg.validate(), Err(SimError::Config(_))));
        let bad = MarketConfig::iid(VD::BetaA1 { a: -1.0 }, 2, s);
        assert!(matches!(bad.validate(), Err(SimError::Distribution(_))));
    }

    #[test]
    fn sws_two_uniform_cost_is_deterministic() {
        for engine in [Engine::Direct, Engine::GeometricJump] {
            let cfg = MarketConfig::iid(VD::uniform(), 2, PricingStrategy::sws(1.0).unwrap())
                .with_engine(engine);
            for seed in 0..20 {
                let trace = run(&cfg, &mut RandomStream::from_seed(seed)).unwrap();
                assert_eq!(trace.total_cost, 1.5);
            }
        }
    }

    #[test]
    fn two_uniform_mean_wait_matches_oracle() {
        let cfg = MarketConfig::iid(VD::uniform(), 2, PricingStrategy::sws(1.0).unwrap());
        let oracle = expected_wait_oracle(&cfg).unwrap();
        assert!((oracle.exact().unwrap() - 7.0 / 3.0).abs() < 1e-12);
        for engine in [Engine::Direct, Engine::GeometricJump] {
            let cfg = cfg.clone().with_engine(engine);
            let n = 10_000;
            let waits: Vec<f64> = (0..n)
                .map(|r| {
                    run(&cfg, &mut RandomStream::for_run(99, r))
                        .unwrap()
                        .total_wait as f64
                })
                .collect();
            let mean = waits.iter().sum::<f64>() / n as f64;
            let var = waits.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let se = (var / n as f64).sqrt();
            assert!(
                (mean - 7.0 / 3.0).abs() < 3.0 * se,
                "{engine:?}: {mean} ± {se}"
            );
        }
    }

    #[test]
    fn oracle_examples() {
        let s = PricingStrategy::sws(1.0).unwrap();
        let one = expected_wait_oracle(&MarketConfig::iid(VD::uniform(), 1, s)).unwrap();
        assert_eq!(one.exact(), Some(1.0));
        let big = expected_wait_oracle(&MarketConfig::iid(VD::uniform(), 1000, s)).unwrap();
        let w = big.exact().unwrap();
        assert!(w >= 1000.0 && w <= 1000.0 / (1.0 - (-1.0f64).exp()), "{w}");
    }

    #[test]
    fn oracle_bounds_for_heterogeneous_markets() {
        let ds = vec![
            VD::uniform(),
            VD::beta_a1(2.0).unwrap(),
            VD::trunc_exp(3.0).unwrap(),
        ];
        let sws = expected_wait_oracle(&MarketConfig::new(
            ds.clone(),
            PricingStrategy::sws(1.0).unwrap(),
        ))
        .unwrap();
        assert!(sws.lower <= sws.upper && sws.lower >= 3.0);
        assert!(sws.upper <= 3.0 / (1.0 - (-1.0f64).exp()) + 1e-12);
        let fixed = expected_wait_oracle(&MarketConfig::new(
            ds.clone(),
            PricingStrategy::fixed(0.3).unwrap(),
        ))
        .unwrap();
        assert!(fixed.lower < fixed.upper);
        // A law that never accepts at the fixed price stalls the last iteration.
        let stuck = vec![VD::uniform(), VD::point_mass(0.9).unwrap()];
        let err = expected_wait_oracle(&MarketConfig::new(
            stuck,
            PricingStrategy::fixed(0.3).unwrap(),
        ))
        .unwrap_err();
        assert!(matches!(err, SimError::ZeroSuccessProbability { t: 2, .. }));
        // Large heterogeneous SWS markets fall back to the success-floor bound.
        let mut many = vec![VD::uniform(); 20];
        many.push(VD::beta_a1(2.0).unwrap());
        let loose =
            expected_wait_oracle(&MarketConfig::new(many, PricingStrategy::sws(1.0).unwrap()))
                .unwrap();
        assert_eq!(loose.lower, 21.0);
    }

    #[test]
    fn same_seed_same_trace() {
        let ds = vec![
            VD::uniform(),
            VD::beta_a1(2.0).unwrap(),
            VD::uniform(),
            VD::trunc_exp(3.0).unwrap(),
        ];
        for engine in [Engine::Direct, Engine::GeometricJump] {
            for tb in [
                TieBreak::UniformAmongAccepting,
                TieBreak::LowestIndex,
                TieBreak::MaxMargin,
            ] {
                let cfg = MarketConfig::new(ds.clone(), PricingStrategy::sws(1.0).unwrap())
                    .with_engine(engine)
                    .with_tie_break(tb);
                let a = run(&cfg, &mut RandomStream::from_seed(5)).unwrap();
                let b = run(&cfg, &mut RandomStream::from_seed(5)).unwrap();
                assert_eq!(a, b);
                check_well_formed(&cfg, &a);
            }
        }
    }

    #[test]
    fn traces_are_well_formed_for_random_configs() {
        let pool = [
            VD::uniform(),
            VD::beta_a1(0.5).unwrap(),
            VD::beta_a1(2.0).unwrap(),
            VD::trunc_exp(3.0).unwrap(),
            VD::gap_shifted(VD::uniform(), 0.2).unwrap(),
            VD::horizontal_mix(VD::uniform(), 0.5, 0.2).unwrap(),
            VD::vertical_shift(VD::uniform(), 0.05).unwrap(),
            VD::point_mass(0.3).unwrap(),
        ];
        let mut rng = RandomStream::from_seed(2024);
        for k in 0..1000 {
            let m = 1 + rng.index(12);
            let ds: Vec<VD> = (0..m)
                .map(|_| pool[rng.index(pool.len())].clone())
                .collect();
            let strategy = match rng.index(3) {
                0 => PricingStrategy::sws(0.2 + 0.8 * rng.uniform()).unwrap(),
                1 => PricingStrategy::fixed(0.35 + 0.65 * rng.uniform()).unwrap(),
                _ => PricingStrategy::success_floor_optimal(0.3 + 0.6 * rng.uniform()).unwrap(),
            };
            let engine = if rng.index(2) == 0 {
                Engine::Direct
            } else {
                Engine::GeometricJump
            };
            let tb = [
                TieBreak::UniformAmongAccepting,
                TieBreak::LowestIndex,
                TieBreak::MaxMargin,
            ][rng.index(3)];
            let cfg = MarketConfig::new(ds, strategy)
                .with_engine(engine)
                .with_tie_break(tb);
            let trace = run(&cfg, &mut RandomStream::from_seed(k)).unwrap();
            check_well_formed(&cfg, &trace);
        }
    }

    // Exact probability that category i is completed first, by enumerating the
    // successful worker's acceptance set under uniform tie-breaking.
    fn first_completion_oracle(ds: &[VD], p: f64) -> Vec<f64> {
        let m = ds.len();
        let acc: Vec<f64> = ds.iter().map(|d| d.cdf(p)).collect();
        let mut out = vec![0.0; m];
        let mut total = 0.0;
        for mask in 1u32..(1 << m) {
            let mut pr = 1.0;
            for i in 0..m {
                pr *= if mask & (1 << i) != 0 {
                    acc[i]
                } else {
                    1.0 - acc[i]
                };
            }
            total += pr;
            let k = mask.count_ones() as f64;
            for (i, o) in out.iter_mut().enumerate() {
                if mask & (1 << i) != 0 {
                    *o += pr / k;
                }
            }
        }
        out.iter().map(|x| x / total).collect()
    }

    #[test]
    fn heterogeneous_first_completion_matches_enumeration() {
        let ds = vec![
            VD::uniform(),
            VD::beta_a1(2.0).unwrap(),
            VD::uniform(),
            VD::trunc_exp(3.0).unwrap(),
            VD::beta_a1(2.0).unwrap(),
        ];
        let p = 0.3;
        let oracle = first_completion_oracle(&ds, p);
        let n = 40_000;
        for engine in [Engine::Direct, Engine::GeometricJump] {
            let cfg = MarketConfig::new(ds.clone(), PricingStrategy::fixed(p).unwrap())
                .with_engine(engine);
            let mut counts = vec![0usize; ds.len()];
            for r in 0..n {
                let trace = run(&cfg, &mut RandomStream::for_run(17, r)).unwrap();
                counts[trace.iterations[0].completed_category] += 1;
            }
            for (i, &c) in counts.iter().enumerate() {
                let freq = c as f64 / n as f64;
                let se = (oracle[i] * (1.0 - oracle[i]) / n as f64).sqrt();
                assert!(
                    (freq - oracle[i]).abs() < 4.0 * se,
                    "{engine:?} cat {i}: {freq} vs {}",
                    oracle[i]
                );
            }
        }
    }

    #[test]
    fn lowest_index_and_max_margin_engines_agree() {
        let ds = vec![
            VD::uniform(),
            VD::beta_a1(2.0).unwrap(),
            VD::trunc_exp(3.0).unwrap(),
        ];
        let n = 20_000;
        for tb in [TieBreak::LowestIndex, TieBreak::MaxMargin] {
            let mut freq = [[0usize; 3]; 2];
            for (e, engine) in [Engine::Direct, Engine::GeometricJump]
                .into_iter()
                .enumerate()
            {
                let cfg = MarketConfig::new(ds.clone(), PricingStrategy::fixed(0.4).unwrap())
                    .with_engine(engine)
                    .with_tie_break(tb);
                for r in 0..n {
                    let trace = run(&cfg, &mut RandomStream::for_run(3 + e as u64, r)).unwrap();
                    freq[e][trace.iterations[0].completed_category] += 1;
                }
            }
            for i in 0..3 {
                let a = freq[0][i] as f64 / n as f64;
                let b = freq[1][i] as f64 / n as f64;
                let pooled = 0.5 * (a + b);
                let se = (2.0 * pooled * (1.0 - pooled) / n as f64).sqrt().max(1e-9);
                assert!((a - b).abs() < 4.0 * se, "{tb:?} cat {i}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn geometric_inversion_mean() {
        let mut rng = RandomStream::from_seed(8);
        let q = 0.2;
        let n = 100_000;
        let mean = (0..n).map(|_| geometric(q, &mut rng)).sum::<f64>() / n as f64;
        // sd of Geometric(0.2) is sqrt(0.8)/0.2 ≈ 4.47
        assert!(
            (mean - 5.0).abs() < 3.0 * 4.48 / (n as f64).sqrt(),
            "{mean}"
        );
        assert_eq!(geometric(1.0, &mut rng), 1.0);
    }

    #[test]
    fn trace_csv_layout() {
        let cfg = MarketConfig::iid(VD::uniform(), 2, PricingStrategy::sws(1.0).unwrap());
        let trace = run(&cfg, &mut RandomStream::from_seed(1)).unwrap();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(TRACE_HEADER).unwrap();
        write_trace_csv(&mut w, 4, &trace).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "run_id,t,active_size,price,wait,completed_category"
        );
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("4,1,2,0.5,"));
        assert!(lines[3].starts_with("4,total,,1.5,"));
    }
}
