//! Config-driven experiments: single simulations, parameter sweeps and
//! regime classification of sweep output.
//!
//! Configs are TOML. Distribution descriptors, strategies and collective
//! stanzas use the same field names as their JSON serialization, e.g.
//! `{family = "beta_a1", a = 2.0}` or `{collective = "vertical", epsilon = 0.01}`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    fit_regime, mean_std, RegimeFit, CONSTANT_SPREAD, LINEAR_EXPONENT, LOG_EXPONENT,
};
use crate::collective::{
    apply_horizontal, apply_vertical, BudgetWarning, CollectiveError, HorizontalPlan, VerticalPlan,
};
use crate::distributions::{CostRegime, ValuationDistribution};
use crate::market_sim::{
    self, expected_wait_oracle, Engine, MarketConfig, SimError, TieBreak, WaitOracle,
    DEFAULT_WAIT_CAP,
};
use crate::pricing::PricingStrategy;
use crate::rng::{derive_run_seed, RandomStream};

pub const SWEEP_HEADER: [&str; 12] = [
    "experiment_id",
    "family",
    "params",
    "M",
    "alpha",
    "epsilon",
    "run_index",
    "seed",
    "total_cost",
    "total_wait",
    "theta",
    "engine",
];

pub const FAILURE_HEADER: [&str; 9] = [
    "experiment_id",
    "family",
    "params",
    "M",
    "alpha",
    "epsilon",
    "run_index",
    "seed",
    "error",
];

/// Four families, four horizontal collective sizes, floor 0.2.
pub const PAPER_FIGURES_CONFIG: &str = include_str!("../configs/paper_figures.toml");
/// Uniform valuations: horizontal collectives against a vertical one with budget 0.01.
pub const VERTICAL_COMPARISON_CONFIG: &str = include_str!("../configs/vertical_comparison.toml");

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("cell {cell} has {distinct} distinct M values; at least 4 are needed")]
    InsufficientGrid { cell: String, distinct: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ExperimentError {
    /// 2 for configuration problems, 3 for simulation failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::InsufficientGrid { .. } => 2,
            ExperimentError::Simulation(SimError::Config(_))
            | ExperimentError::Simulation(SimError::Distribution(_)) => 2,
            ExperimentError::Simulation(_) => 3,
            _ => 1,
        }
    }
}

impl From<CollectiveError> for ExperimentError {
    fn from(e: CollectiveError) -> Self {
        ExperimentError::Config(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_to_string(path: &Path) -> Result<String, ExperimentError> {
    let mut s = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(io_err(path))?;
    Ok(s)
}

/// Collective-action stanza.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "collective", rename_all = "snake_case", deny_unknown_fields)]
pub enum CollectiveSpec {
    /// One floor broadcast to every category.
    Horizontal { alpha: f64, floor: f64 },
    Vertical {
        epsilon: f64,
        #[serde(default = "one")]
        target_fraction: f64,
        /// Explicit targets; overrides `target_fraction` when present.
        #[serde(default)]
        targets: Option<Vec<usize>>,
    },
}

impl CollectiveSpec {
    pub fn alpha(&self) -> f64 {
        match self {
            CollectiveSpec::Horizontal { alpha, .. } => *alpha,
            CollectiveSpec::Vertical { .. } => 0.0,
        }
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            CollectiveSpec::Horizontal { .. } => 0.0,
            CollectiveSpec::Vertical { epsilon, .. } => *epsilon,
        }
    }

    /// Identifier used as `experiment_id` in sweep output.
    pub fn id(&self) -> String {
        match self {
            CollectiveSpec::Horizontal { alpha, floor } => {
                format!("horizontal:alpha={alpha};floor={floor}")
            }
            CollectiveSpec::Vertical {
                epsilon,
                target_fraction,
                targets,
            } => match targets {
                Some(t) => format!("vertical:epsilon={epsilon};targets={}", t.len()),
                None => format!("vertical:epsilon={epsilon};fraction={target_fraction}"),
            },
        }
    }

    /// The `m` category laws after the intervention.
    pub fn apply(
        &self,
        base: &ValuationDistribution,
        m: usize,
    ) -> Result<(Vec<ValuationDistribution>, Vec<BudgetWarning>), ExperimentError> {
        let ds = vec![base.clone(); m];
        match self {
            // alpha = 0 is the identical law; skip the wrapper.
            CollectiveSpec::Horizontal { alpha, .. } if *alpha == 0.0 => Ok((ds, Vec::new())),
            CollectiveSpec::Horizontal { alpha, floor } => Ok((
                apply_horizontal(&HorizontalPlan::uniform_floor(*alpha, *floor, m), &ds)?,
                Vec::new(),
            )),
            CollectiveSpec::Vertical {
                epsilon,
                target_fraction,
                targets,
            } => {
                let plan = match targets {
                    Some(t) => VerticalPlan::with_indices(*epsilon, t.clone(), m)?,
                    None => VerticalPlan::first_fraction(*epsilon, *target_fraction, m)?,
                };
                let out = apply_vertical(&plan, &ds)?;
                Ok((out.distributions, out.warnings))
            }
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_alpha_grid() -> Vec<f64> {
    vec![0.0]
}

fn default_floor() -> f64 {
    0.2
}

fn default_runs() -> usize {
    60
}

fn default_wait_cap() -> u64 {
    DEFAULT_WAIT_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub families: Vec<ValuationDistribution>,
    #[serde(rename = "M_grid")]
    pub m_grid: Vec<usize>,
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: Vec<f64>,
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default)]
    pub epsilon_grid: Vec<f64>,
    /// Share of categories a vertical collective targets.
    #[serde(default = "one")]
    pub target_fraction: f64,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default)]
    pub tie_break: TieBreak,
    #[serde(default = "default_wait_cap")]
    pub wait_cap: u64,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_toml(&read_to_string(path)?).map_err(|e| match e {
            ExperimentError::Config(msg) => {
                ExperimentError::Config(format!("{}: {msg}", path.display()))
            }
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        if self.families.is_empty() {
            return bad("field `families`: must be nonempty".into());
        }
        for (i, f) in self.families.iter().enumerate() {
            f.validate()
                .map_err(|e| ExperimentError::Config(format!("field `families[{i}]`: {e}")))?;
        }
        if self.m_grid.is_empty() {
            return bad("field `M_grid`: must be nonempty".into());
        }
        if let Some(m) = self.m_grid.iter().find(|&&m| m == 0) {
            return bad(format!("field `M_grid`: {m} is not a positive integer"));
        }
        if self.alpha_grid.is_empty() && self.epsilon_grid.is_empty() {
            return bad(
                "fields `alpha_grid` and `epsilon_grid`: at least one intervention is required"
                    .into(),
            );
        }
        if let Some(a) = self.alpha_grid.iter().find(|a| !(0.0..1.0).contains(*a)) {
            return bad(format!("field `alpha_grid`: {a} is outside [0, 1)"));
        }
        if let Some(e) = self.epsilon_grid.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return bad(format!("field `epsilon_grid`: {e} is outside (0, 1)"));
        }
        if !(self.floor > 0.0 && self.floor <= 1.0) {
            return bad(format!("field `floor`: {} is outside (0, 1]", self.floor));
        }
        if !(self.target_fraction > 0.0 && self.target_fraction <= 1.0) {
            return bad(format!(
                "field `target_fraction`: {} is outside (0, 1]",
                self.target_fraction
            ));
        }
        if self.n_runs == 0 {
            return bad("field `n_runs`: must be at least 1".into());
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return bad(format!("field `theta`: {} is outside (0, 1]", self.theta));
        }
        if let Some(&m) = self.m_grid.iter().max() {
            if self.wait_cap < m as u64 {
                return bad(format!(
                    "field `wait_cap`: {} is below the largest M {m}",
                    self.wait_cap
                ));
            }
        }
        Ok(())
    }

    /// Horizontal interventions in `alpha_grid` order, then vertical ones.
    pub fn interventions(&self) -> Vec<CollectiveSpec> {
        self.alpha_grid
            .iter()
            .map(|&alpha| CollectiveSpec::Horizontal {
                alpha,
                floor: self.floor,
            })
            .chain(
                self.epsilon_grid
                    .iter()
                    .map(|&epsilon| CollectiveSpec::Vertical {
                        epsilon,
                        target_fraction: self.target_fraction,
                        targets: None,
                    }),
            )
            .collect()
    }

    pub fn expected_rows(&self) -> usize {
        self.families.len() * self.m_grid.len() * self.interventions().len() * self.n_runs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub experiment_id: String,
    pub family: String,
    pub params: String,
    #[serde(rename = "M")]
    pub m: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub run_index: u64,
    pub seed: u64,
    pub total_cost: f64,
    pub total_wait: u64,
    pub theta: f64,
    pub engine: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepFailure {
    pub row: SweepRow,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    /// Canonical order: family, intervention, M, run index.
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
    /// One entry per (family, intervention, M) cell that produced warnings.
    pub warnings: Vec<String>,
}

struct Cell {
    experiment_id: String,
    family: String,
    params: String,
    m: usize,
    alpha: f64,
    epsilon: f64,
    market: Result<MarketConfig, String>,
}

/// Runs every (family, intervention, M, run) combination on `threads`
/// worker threads. Output does not depend on `threads`.
pub fn run_sweep(cfg: &ExperimentConfig, threads: usize) -> Result<SweepResult, ExperimentError> {
    cfg.validate()?;
    let strategy =
        PricingStrategy::sws(cfg.theta).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let mut cells = Vec::new();
    let mut warnings = Vec::new();
    for family in &cfg.families {
        for intervention in cfg.interventions() {
            for &m in &cfg.m_grid {
                let market = match intervention.apply(family, m) {
                    Ok((ds, warns)) => {
                        if let Some(w) = warns.first() {
                            warnings.push(format!(
                                "{} {} M={m}: {} categories affected, e.g. {w}",
                                family.label(),
                                intervention.id(),
                                warns.len()
                            ));
                        }
                        Ok(MarketConfig::new(ds, strategy)
                            .with_engine(cfg.engine)
                            .with_tie_break(cfg.tie_break)
                            .with_wait_cap(cfg.wait_cap))
                    }
                    Err(e) => Err(e.to_string()),
                };
                cells.push(Cell {
                    experiment_id: intervention.id(),
                    family: family.family_name().to_string(),
                    params: family.params_string(),
                    m,
                    alpha: intervention.alpha(),
                    epsilon: intervention.epsilon(),
                    market,
                });
            }
        }
    }

    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..cfg.n_runs as u64).map(move |r| (c, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| ExperimentError::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<(SweepRow, Option<String>)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, run_index)| {
                let cell = &cells[c];
                let seed = derive_run_seed(cfg.master_seed, run_index);
                let mut row = SweepRow {
                    experiment_id: cell.experiment_id.clone(),
                    family: cell.family.clone(),
                    params: cell.params.clone(),
                    m: cell.m,
                    alpha: cell.alpha,
                    epsilon: cell.epsilon,
                    run_index,
                    seed,
                    total_cost: 0.0,
                    total_wait: 0,
                    theta: cfg.theta,
                    engine: cfg.engine.as_str().to_string(),
                };
                let outcome = match &cell.market {
                    Ok(market) => market_sim::run(market, &mut RandomStream::from_seed(seed))
                        .map_err(|e| e.to_string()),
                    Err(e) => Err(e.clone()),
                };
                match outcome {
                    Ok(trace) => {
                        row.total_cost = trace.total_cost;
                        row.total_wait = trace.total_wait;
                        (row, None)
                    }
                    Err(e) => (row, Some(e)),
                }
            })
            .collect()
    });

    let mut result = SweepResult {
        warnings,
        ..Default::default()
    };
    for (row, err) in outcomes {
        match err {
            None => result.rows.push(row),
            Some(error) => result.failures.push(SweepFailure { row, error }),
        }
    }
    Ok(result)
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment_id.as_str(),
            &r.family,
            &r.params,
            &r.m.to_string(),
            &r.alpha.to_string(),
            &r.epsilon.to_string(),
            &r.run_index.to_string(),
            &r.seed.to_string(),
            &r.total_cost.to_string(),
            &r.total_wait.to_string(),
            &r.theta.to_string(),
            &r.engine,
        ])?;
    }
    w.flush().map_err(|source| ExperimentError::Io {
        path: "<sweep csv>".into(),
        source,
    })?;
    Ok(())
}

pub fn write_failures_csv<W: Write>(
    out: W,
    failures: &[SweepFailure],
) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FAILURE_HEADER)?;
    for f in failures {
        let r = &f.row;
        w.write_record([
            r.experiment_id.as_str(),
            &r.family,
            &r.params,
            &r.m.to_string(),
            &r.alpha.to_string(),
            &r.epsilon.to_string(),
            &r.run_index.to_string(),
            &r.seed.to_string(),
            &f.error,
        ])?;
    }
    w.flush().map_err(|source| ExperimentError::Io {
        path: "<failure csv>".into(),
        source,
    })?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRow>, ExperimentError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != SWEEP_HEADER {
        return Err(ExperimentError::Config(format!(
            "unexpected sweep CSV header {header:?}; expected {}",
            SWEEP_HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellPoint {
    #[serde(rename = "M")]
    pub m: usize,
    pub n_runs: usize,
    pub cost_mean: f64,
    pub cost_std: f64,
    pub wait_mean: f64,
    pub wait_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub family: String,
    pub params: String,
    pub experiment_id: String,
    pub alpha: f64,
    pub epsilon: f64,
    pub points: Vec<CellPoint>,
    pub fit: RegimeFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub constant_spread: f64,
    pub log_exponent: f64,
    pub linear_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub thresholds: Thresholds,
    pub cells: Vec<CellReport>,
}

impl RegimeReport {
    pub fn find(&self, family: &ValuationDistribution, experiment_id: &str) -> Option<&CellReport> {
        let (name, params) = (family.family_name(), family.params_string());
        self.cells
            .iter()
            .find(|c| c.family == name && c.params == params && c.experiment_id == experiment_id)
    }
}

/// Groups sweep rows into (family, params, intervention) cells, averages each
/// M over runs and fits the cost regime per cell.
pub fn classify(rows: &[SweepRow]) -> Result<RegimeReport, ExperimentError> {
    type Key = (String, String, String);
    type Cell<'a> = (f64, f64, BTreeMap<usize, Vec<&'a SweepRow>>);
    let mut order: Vec<Key> = Vec::new();
    let mut cells: BTreeMap<Key, Cell> = BTreeMap::new();
    for r in rows {
        let key = (r.family.clone(), r.params.clone(), r.experiment_id.clone());
        let entry = cells.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (r.alpha, r.epsilon, BTreeMap::new())
        });
        entry.2.entry(r.m).or_default().push(r);
    }

    let mut reports = Vec::with_capacity(order.len());
    for key in order {
        let (alpha, epsilon, by_m) = &cells[&key];
        if by_m.len() < 4 {
            return Err(ExperimentError::InsufficientGrid {
                cell: format!("{}[{}] {}", key.0, key.1, key.2),
                distinct: by_m.len(),
            });
        }
        let points: Vec<CellPoint> = by_m
            .iter()
            .map(|(&m, rs)| {
                let costs: Vec<f64> = rs.iter().map(|r| r.total_cost).collect();
                let waits: Vec<f64> = rs.iter().map(|r| r.total_wait as f64).collect();
                let (cost_mean, cost_std) = mean_std(&costs);
                let (wait_mean, wait_std) = mean_std(&waits);
                CellPoint {
                    m,
                    n_runs: rs.len(),
                    cost_mean,
                    cost_std,
                    wait_mean,
                    wait_std,
                }
            })
            .collect();
        let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.m as f64, p.cost_mean)).collect();
        let fit = fit_regime(&xy)
            .map_err(|e| ExperimentError::Config(format!("{}[{}] {}: {e}", key.0, key.1, key.2)))?;
        reports.push(CellReport {
            family: key.0,
            params: key.1,
            experiment_id: key.2,
            alpha: *alpha,
            epsilon: *epsilon,
            points,
            fit,
        });
    }
    Ok(RegimeReport {
        thresholds: Thresholds {
            constant_spread: CONSTANT_SPREAD,
            log_exponent: LOG_EXPONENT,
            linear_exponent: LINEAR_EXPONENT,
        },
        cells: reports,
    })
}

/// Short text form of a regime, e.g. `sublinear(0.512)`.
pub fn regime_label(r: &CostRegime) -> String {
    match r {
        CostRegime::Linear => "linear".into(),
        CostRegime::Sublinear(s) => format!("sublinear({s:.3})"),
        CostRegime::Log => "log".into(),
        CostRegime::Constant => "constant".into(),
    }
}

/// Single-simulation config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub family: ValuationDistribution,
    #[serde(rename = "M")]
    pub m: usize,
    pub strategy: PricingStrategy,
    #[serde(default)]
    pub collective: Option<CollectiveSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default)]
    pub tie_break: TieBreak,
    #[serde(default = "default_wait_cap")]
    pub wait_cap: u64,
}

impl SimulateConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn market(&self) -> Result<(MarketConfig, Vec<BudgetWarning>), ExperimentError> {
        self.family
            .validate()
            .map_err(|e| ExperimentError::Config(format!("field `family`: {e}")))?;
        self.strategy
            .validate()
            .map_err(|e| ExperimentError::Config(format!("field `strategy`: {e}")))?;
        if self.m == 0 {
            return Err(ExperimentError::Config(
                "field `M`: must be at least 1".into(),
            ));
        }
        let (ds, warnings) = match &self.collective {
            Some(c) => c.apply(&self.family, self.m)?,
            None => (vec![self.family.clone(); self.m], Vec::new()),
        };
        let market = MarketConfig::new(ds, self.strategy)
            .with_engine(self.engine)
            .with_tie_break(self.tie_break)
            .with_wait_cap(self.wait_cap);
        market
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok((market, warnings))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub family: String,
    pub params: String,
    #[serde(rename = "M")]
    pub m: usize,
    pub strategy: PricingStrategy,
    pub collective: Option<CollectiveSpec>,
    pub engine: Engine,
    pub tie_break: TieBreak,
    pub seed: u64,
    pub total_cost: f64,
    pub total_wait: u64,
    pub min_success_prob: f64,
    pub expected_wait: Option<WaitOracle>,
    pub warnings: Vec<String>,
}

/// Runs one simulation; returns its summary and trace.
pub fn simulate(
    cfg: &SimulateConfig,
) -> Result<(SimulateSummary, market_sim::SimulationTrace), ExperimentError> {
    let (market, warnings) = cfg.market()?;
    let trace = market_sim::run(&market, &mut RandomStream::from_seed(cfg.seed))?;
    let summary = SimulateSummary {
        family: cfg.family.family_name().to_string(),
        params: cfg.family.params_string(),
        m: cfg.m,
        strategy: cfg.strategy,
        collective: cfg.collective.clone(),
        engine: cfg.engine,
        tie_break: cfg.tie_break,
        seed: cfg.seed,
        total_cost: trace.total_cost,
        total_wait: trace.total_wait,
        min_success_prob: trace.min_success_prob(),
        expected_wait: expected_wait_oracle(&market).ok(),
        warnings: warnings.iter().map(|w| w.to_string()).collect(),
    };
    Ok((summary, trace))
}

/// Parses a compact family spec: `uniform`, `beta_a1:2`, `beta_1b:0.5`,
/// `trunc_exp:3`, `pointmass:0.5`, `gap:0.2` (uniform shifted onto [0.2, 1]),
/// or a JSON descriptor.
pub fn parse_family(spec: &str) -> Result<ValuationDistribution, ExperimentError> {
    let spec = spec.trim();
    let bad = |msg: String| ExperimentError::Config(format!("family `{spec}`: {msg}"));
    if spec.starts_with('{') {
        let d: ValuationDistribution =
            serde_json::from_str(spec).map_err(|e| bad(e.to_string()))?;
        d.validate().map_err(|e| bad(e.to_string()))?;
        return Ok(d);
    }
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (spec, None),
    };
    let num = || -> Result<f64, ExperimentError> {
        arg.ok_or_else(|| bad("missing parameter".into()))?
            .parse::<f64>()
            .map_err(|e| bad(e.to_string()))
    };
    let d = match name.to_ascii_lowercase().as_str() {
        "uniform" => Ok(ValuationDistribution::Uniform),
        "beta_a1" | "beta" => ValuationDistribution::beta_a1(num()?),
        "beta_1b" => ValuationDistribution::beta_1b(num()?),
        "trunc_exp" | "exp" | "exponential" => ValuationDistribution::trunc_exp(num()?),
        "pointmass" | "point_mass" => ValuationDistribution::point_mass(num()?),
        "gap" | "gap_shifted" => {
            ValuationDistribution::gap_shifted(ValuationDistribution::Uniform, num()?)
        }
        other => return Err(bad(format!("unknown family `{other}`"))),
    };
    d.map_err(|e| bad(e.to_string()))
}

/// Parses `sws`, `sws:<theta>`, `fixed:<p>` or `optimal:<q_target>`;
/// `theta` applies to a bare `sws`.
pub fn parse_strategy(spec: &str, theta: f64) -> Result<PricingStrategy, ExperimentError> {
    let bad = |msg: String| ExperimentError::Config(format!("strategy `{spec}`: {msg}"));
    let (name, arg) = match spec.trim().split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (spec.trim(), None),
    };
    let num = |a: Option<&str>| -> Result<f64, ExperimentError> {
        a.ok_or_else(|| bad("missing parameter".into()))?
            .parse::<f64>()
            .map_err(|e| bad(e.to_string()))
    };
    let s = match name {
        "sws" => PricingStrategy::sws(match arg {
            Some(_) => num(arg)?,
            None => theta,
        }),
        "fixed" => PricingStrategy::fixed(num(arg)?),
        "optimal" | "success_floor_optimal" => PricingStrategy::success_floor_optimal(num(arg)?),
        other => return Err(bad(format!("unknown strategy `{other}`"))),
    };
    s.map_err(|e| bad(e.to_string()))
}
