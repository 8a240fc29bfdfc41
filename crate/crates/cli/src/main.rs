//! `entropy-embed`: simulate benchmark systems, analyze multichannel
//! recordings and run benchmark grids.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 invalid flags or
//! parameters, 3 malformed input (CSV, grid spec, fewer than two channels),
//! 4 series too short for the requested embedding.

mod report;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use entropy_embed::benchmark::{run_grid_with, write_aggregate_csv, write_realizations_csv, GridSpec};
use entropy_embed::nue::{AicRule, Algorithm};
use entropy_embed::simgen::{henon, mix, nonlinear_ar};
use entropy_embed::{dependency_matrix, Error as CoreError, MultivariateSeries, NueConfig};

use report::AnalysisReport;

#[derive(Parser, Debug)]
#[command(name = "entropy-embed", version, about = "Directed dependencies by non-uniform embedding")]
struct Cli {
    /// Worker threads (default: all available cores).
    #[arg(long, global = true, env = "ENTROPY_EMBED_WORKERS", value_parser = clap::value_parser!(u16).range(1..))]
    workers: Option<u16>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic 5-channel series with known coupling.
    Simulate(SimulateArgs),
    /// Estimate the directed dependency matrix of a CSV series.
    Analyze(AnalyzeArgs),
    /// Run a benchmark grid and write summary CSVs.
    Benchmark(BenchmarkArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Henon,
    Ar,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlgorithmArg {
    Msr,
    Bootstrap,
    La,
    Aic,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Msr => Algorithm::Msr,
            AlgorithmArg::Bootstrap => Algorithm::Bootstrap,
            AlgorithmArg::La => Algorithm::La,
            AlgorithmArg::Aic => Algorithm::Aic,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AicRuleArg {
    Decrease,
    Increase,
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not in [0, 1]"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} is not a non-negative number"))
    }
}

fn open_percent(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 100.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not in (0, 100)"))
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Number of samples.
    #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u32).range(32..))]
    n: u32,
    /// Henon coupling strength.
    #[arg(long, default_value_t = 0.6, value_parser = unit_interval)]
    q: f64,
    /// Instantaneous mixing strength.
    #[arg(long, default_value_t = 0.0, value_parser = unit_interval)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Series CSV.
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth JSON (default: next to --out with a `_truth.json` suffix).
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Series CSV with a header row of channel labels.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "msr")]
    algorithm: AlgorithmArg,
    /// Embedding delay.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    m: u32,
    /// Embedding dimension.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    d: u32,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    k_neighbors: u32,
    #[arg(long, default_value_t = 0.5, value_parser = unit_interval)]
    lambda: f64,
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    theiler: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    bootstrap_size: u32,
    #[arg(long, default_value_t = 95.0, value_parser = open_percent)]
    percentile: f64,
    /// Iteration cap per target (default: pool size).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    max_iterations: Option<u32>,
    #[arg(long, value_enum, default_value = "decrease")]
    aic_rule: AicRuleArg,
    /// JSON report.
    #[arg(long)]
    out: PathBuf,
    /// CTE matrix CSV (default: next to --out with a `_cte.csv` suffix).
    #[arg(long)]
    cte_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    /// Grid spec JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output prefix; writes `<prefix>_summary.csv` and
    /// `<prefix>_realizations.csv`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    realizations: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// `path` with its extension replaced by `suffix`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let n = args.n as usize;
    let (series, truth) = match args.model {
        ModelArg::Henon => henon(n, args.q, args.seed)?,
        ModelArg::Ar => nonlinear_ar(n, args.seed)?,
    };
    let series = mix(&series, args.alpha)?;
    series.write_csv(create(&args.out)?)?;
    let truth_path = args.truth_out.unwrap_or_else(|| sibling(&args.out, "_truth.json"));
    let mut w = create(&truth_path)?;
    writeln!(w, "{}", truth.to_json()?)?;
    w.flush()?;
    eprintln!(
        "wrote {} ({} channels x {} samples) and {} ({} edges)",
        args.out.display(),
        series.n_channels(),
        series.len(),
        truth_path.display(),
        truth.n_edges()
    );
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> anyhow::Result<()> {
    let file = File::open(&args.input).with_context(|| format!("cannot open {}", args.input.display()))?;
    let series = MultivariateSeries::read_csv(BufReader::new(file))?;
    let config = NueConfig {
        algorithm: args.algorithm.into(),
        m: args.m as usize,
        d: args.d as usize,
        neighbors: args.k_neighbors as usize,
        lambda: args.lambda,
        gamma: args.gamma,
        bootstrap_size: args.bootstrap_size as usize,
        percentile: args.percentile,
        theiler: args.theiler as usize,
        max_iterations: args.max_iterations.map(|v| v as usize),
        seed: args.seed,
        aic_rule: match args.aic_rule {
            AicRuleArg::Decrease => AicRule::Decrease,
            AicRuleArg::Increase => AicRule::Increase,
        },
        ..NueConfig::default()
    };
    let result = dependency_matrix(&series, &config)?;
    let report = AnalysisReport::new(&result, &config);

    let mut w = create(&args.out)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    let cte_path = args.cte_out.unwrap_or_else(|| sibling(&args.out, "_cte.csv"));
    report.write_cte_csv(create(&cte_path)?)?;

    print!("{}", report.summary());
    Ok(())
}

fn benchmark(args: BenchmarkArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("cannot read {}", args.config.display()))?;
    let grid = GridSpec::from_json(&text).map_err(|e| match e {
        CoreError::InvalidParameter(msg) => CoreError::Csv(format!("{}: {msg}", args.config.display())),
        other => other,
    })?;
    let rows = run_grid_with(&grid, args.realizations as usize, args.seed, |i, total, row| {
        let c = &row.cell;
        let mut params = format!("{} {} N={}", c.algorithm, c.model.name(), c.n);
        for (name, v) in [("Q", c.q), ("alpha", c.alpha), ("lambda", c.lambda), ("gamma", c.gamma)] {
            if let Some(v) = v {
                params.push_str(&format!(" {name}={v}"));
            }
        }
        eprintln!(
            "[{}/{}] {params}: acc {:.1} tpr {:.1} tnr {:.1} ({} ok, {} failed, {:.2} s/realization)",
            i + 1,
            total,
            row.acc,
            row.tpr,
            row.tnr,
            row.realizations.len(),
            row.failures.len(),
            row.seconds
        );
        for (r, e) in &row.failures {
            eprintln!("  warning: realization {r} failed: {e}");
        }
    });
    let summary = with_suffix(&args.out, "_summary.csv");
    let per_realization = with_suffix(&args.out, "_realizations.csv");
    write_aggregate_csv(create(&summary)?, &rows)?;
    write_realizations_csv(create(&per_realization)?, &rows)?;
    eprintln!("wrote {} and {}", summary.display(), per_realization.display());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return match e {
                CoreError::InvalidParameter(_) => 2,
                CoreError::Csv(_)
                | CoreError::InvalidSeries(_)
                | CoreError::ConstantChannel { .. }
                | CoreError::ShapeMismatch { .. } => 3,
                CoreError::SeriesTooShort { .. } | CoreError::NotEnoughNeighbors { .. } => 4,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers as usize)
            .build_global()
        {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze(a),
        Command::Benchmark(a) => benchmark(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
