use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sws_market::experiment::{
    self, classify, parse_family, parse_strategy, read_sweep_csv, regime_label, run_sweep,
    simulate, write_failures_csv, write_sweep_csv, CollectiveSpec, ExperimentConfig,
    ExperimentError, SimulateConfig,
};
use sws_market::market_sim::{write_trace_csv, DEFAULT_WAIT_CAP, TRACE_HEADER};
use sws_market::{Engine, TieBreak};

#[derive(Parser)]
#[command(
    name = "sws-market",
    version,
    about = "Posted-price market simulator with collective-action interventions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one market and print a JSON summary.
    Simulate(SimulateArgs),
    /// Run a parameter sweep from a TOML config and write one CSV row per run.
    Sweep(SweepArgs),
    /// Fit the cost regime of every cell in a sweep CSV and print a JSON report.
    Classify(ClassifyArgs),
    /// Run a bundled sweep: the four-family grid, or the horizontal against vertical comparison.
    PaperFigures(FiguresArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Direct,
    Geometric,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Direct => Engine::Direct,
            EngineArg::Geometric => Engine::GeometricJump,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TieBreakArg {
    Uniform,
    LowestIndex,
    MaxMargin,
}

impl From<TieBreakArg> for TieBreak {
    fn from(t: TieBreakArg) -> Self {
        match t {
            TieBreakArg::Uniform => TieBreak::UniformAmongAccepting,
            TieBreakArg::LowestIndex => TieBreak::LowestIndex,
            TieBreakArg::MaxMargin => TieBreak::MaxMargin,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML config; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Valuation family, e.g. `uniform`, `pointmass:0.5`, `beta_a1:2`, or a JSON descriptor.
    #[arg(long)]
    family: Option<String>,
    /// Number of categories.
    #[arg(long = "M", alias = "m")]
    m: Option<usize>,
    /// Pricing strategy: `sws`, `sws:<theta>`, `fixed:<p>` or `optimal:<q>`.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    /// Horizontal collective fraction; needs `--floor`.
    #[arg(long, conflicts_with = "epsilon")]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.2)]
    floor: f64,
    /// Vertical collective budget.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    target_fraction: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    #[arg(long, value_enum)]
    tie_break: Option<TieBreakArg>,
    #[arg(long)]
    wait_cap: Option<u64>,
    /// Write the JSON summary here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the per-iteration trace CSV here.
    #[arg(long)]
    emit_trace: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output CSV; defaults to the config's `output_path`, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Sweep CSV to classify.
    csv: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FigureSet {
    /// Four families, collective sizes 0, 0.3, 0.5, 0.8.
    Families,
    /// Uniform valuations, horizontal collectives against a vertical budget of 0.01.
    Vertical,
}

#[derive(Args)]
struct FiguresArgs {
    #[arg(long, value_enum, default_value = "families")]
    set: FigureSet,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also classify the sweep and write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    /// Overrides the number of runs per cell.
    #[arg(long)]
    n_runs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Classify(a) => cmd_classify(a),
        Command::PaperFigures(a) => cmd_figures(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, ExperimentError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| ExperimentError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, ExperimentError> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> Result<(), ExperimentError> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|source| ExperimentError::Io {
            path: path.map_or("<stdout>".into(), |p| p.display().to_string()),
            source,
        })
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), ExperimentError> {
    let mut cfg = match &a.config {
        Some(p) => SimulateConfig::from_toml(&experiment::read_to_string(p)?)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", p.display())))?,
        None => {
            let family = a.family.as_deref().ok_or_else(|| {
                ExperimentError::Config("--family is required without --config".into())
            })?;
            let m = a.m.ok_or_else(|| {
                ExperimentError::Config("--M is required without --config".into())
            })?;
            SimulateConfig {
                family: parse_family(family)?,
                m,
                strategy: parse_strategy(a.strategy.as_deref().unwrap_or("sws"), a.theta)?,
                collective: None,
                seed: 0,
                engine: Engine::default(),
                tie_break: TieBreak::default(),
                wait_cap: DEFAULT_WAIT_CAP,
            }
        }
    };
    if a.config.is_some() {
        if let Some(f) = &a.family {
            cfg.family = parse_family(f)?;
        }
        if let Some(m) = a.m {
            cfg.m = m;
        }
        if let Some(s) = &a.strategy {
            cfg.strategy = parse_strategy(s, a.theta)?;
        }
    }
    if let Some(alpha) = a.alpha {
        cfg.collective = Some(CollectiveSpec::Horizontal {
            alpha,
            floor: a.floor,
        });
    }
    if let Some(epsilon) = a.epsilon {
        cfg.collective = Some(CollectiveSpec::Vertical {
            epsilon,
            target_fraction: a.target_fraction,
            targets: None,
        });
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(e) = a.engine {
        cfg.engine = e.into();
    }
    if let Some(t) = a.tie_break {
        cfg.tie_break = t.into();
    }
    if let Some(c) = a.wait_cap {
        cfg.wait_cap = c;
    }

    let (summary, trace) = simulate(&cfg)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &a.emit_trace {
        let mut w = csv::Writer::from_writer(create(path)?);
        w.write_record(TRACE_HEADER)?;
        write_trace_csv(&mut w, cfg.seed, &trace)?;
        w.flush().map_err(|source| ExperimentError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    write_json(a.out.as_deref(), &summary)
}

fn errors_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".errors.csv");
    PathBuf::from(s)
}

fn execute_sweep(
    cfg: &ExperimentConfig,
    out: Option<&Path>,
    threads: usize,
) -> Result<Vec<experiment::SweepRow>, ExperimentError> {
    let result = run_sweep(cfg, threads)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    write_sweep_csv(output(out)?, &result.rows)?;
    if !result.failures.is_empty() {
        eprintln!(
            "warning: {} of {} runs failed",
            result.failures.len(),
            result.failures.len() + result.rows.len()
        );
        match out {
            Some(p) => {
                let path = errors_path(p);
                write_failures_csv(create(&path)?, &result.failures)?;
                eprintln!("failed runs written to {}", path.display());
            }
            None => write_failures_csv(io::stderr().lock(), &result.failures)?,
        }
    }
    Ok(result.rows)
}

fn cmd_sweep(a: SweepArgs) -> Result<(), ExperimentError> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    if let Some(e) = a.engine {
        cfg.engine = e.into();
    }
    let out = a.out.or_else(|| cfg.output_path.clone());
    execute_sweep(
        &cfg,
        out.as_deref(),
        a.threads.unwrap_or_else(default_threads),
    )?;
    Ok(())
}

fn cmd_classify(a: ClassifyArgs) -> Result<(), ExperimentError> {
    let file = File::open(&a.csv).map_err(|source| ExperimentError::Io {
        path: a.csv.display().to_string(),
        source,
    })?;
    let report = classify(&read_sweep_csv(io::BufReader::new(file))?)?;
    for c in &report.cells {
        eprintln!(
            "{} [{}] {}: {}",
            c.family,
            c.params,
            c.experiment_id,
            regime_label(&c.fit.regime)
        );
    }
    write_json(a.out.as_deref(), &report)
}

fn cmd_figures(a: FiguresArgs) -> Result<(), ExperimentError> {
    let text = match a.set {
        FigureSet::Families => experiment::PAPER_FIGURES_CONFIG,
        FigureSet::Vertical => experiment::VERTICAL_COMPARISON_CONFIG,
    };
    let mut cfg = ExperimentConfig::from_toml(text)?;
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    if let Some(e) = a.engine {
        cfg.engine = e.into();
    }
    if let Some(n) = a.n_runs {
        cfg.n_runs = n;
        cfg.validate()?;
    }
    let rows = execute_sweep(
        &cfg,
        a.out.as_deref(),
        a.threads.unwrap_or_else(default_threads),
    )?;
    if let Some(path) = &a.report {
        let report = classify(&rows)?;
        write_json(Some(path), &report)?;
    }
    Ok(())
}
