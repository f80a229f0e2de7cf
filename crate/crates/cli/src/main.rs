//! `scwqkd`: key rates, loss sweeps and Monte Carlo checks for
//! subcarrier-wave CV-QKD.
//!
//! Exit codes: 0 ok, 1 usage or configuration error, 2 no positive key,
//! 3 a check failed, 130 interrupted.

mod config;
mod output;
mod selftest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use scw_qkd::search::PointStatus;
use scw_qkd::{
    compare_analytic, optimize_point, simulate_rounds, sweep, BlockSize, ChannelModel, KeyRateReport,
    Objective, ScwError, SweepSpec, TunableParams,
};
use serde::Serialize;

use config::RunConfig;
use output::CsvSink;

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Loss points optimized between two CSV flushes. Fixed so that results do
/// not depend on the thread count.
const LOSS_BATCH: usize = 8;

#[derive(Debug, Parser)]
#[command(name = "scwqkd", version, about = "Subcarrier-wave CV-QKD key-rate laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize the key rate at one channel point and print a JSON report.
    Keyrate(KeyrateArgs),
    /// Optimize over the configured loss, noise and block-size grid and write a CSV.
    Sweep(SweepArgs),
    /// Simulate protocol rounds and compare with the analytic model.
    Simulate(SimulateArgs),
    /// Re-run the built-in numerical identity checks.
    Selftest,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; defaults apply when absent.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for the optimizer's random starts and the simulator.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Asymptotic,
    Finite,
}

#[derive(Debug, Args)]
struct KeyrateArgs {
    #[command(flatten)]
    common: Common,
    /// Channel loss in dB; defaults to the first configured loss.
    #[arg(long, value_name = "F")]
    loss_db: Option<f64>,
    /// Excess noise; defaults to the first configured level.
    #[arg(long, value_name = "F")]
    xi: Option<f64>,
    /// Sifted block size, or `inf` for the asymptotic rate.
    #[arg(long, value_name = "INT|inf")]
    n: Option<BlockSize>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Also write the report to this file.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Replace the configured loss grid with a single point.
    #[arg(long, value_name = "F")]
    loss_db: Option<f64>,
    /// Replace the configured noise levels with a single level.
    #[arg(long, value_name = "F")]
    xi: Option<f64>,
    /// Replace the configured block sizes with a single one.
    #[arg(long, value_name = "INT|inf")]
    n: Option<BlockSize>,
    /// Keep only the asymptotic or only the finite-size curves.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// CSV destination; a `.meta.json` sidecar is written next to it.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_name = "F")]
    loss_db: Option<f64>,
    #[arg(long, value_name = "F")]
    xi: Option<f64>,
    #[arg(long, value_name = "INT", default_value_t = 1_000_000,
          value_parser = clap::value_parser!(u64).range(1..))]
    rounds: u64,
    /// Also write the result to this file.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    NoKey(String),
    Check(String),
    Interrupted(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::NoKey(_) => 2,
            Failure::Check(_) => 3,
            Failure::Interrupted(_) => 130,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::NoKey(m) | Failure::Check(m) | Failure::Interrupted(m) => m,
        }
    }
}

impl From<ScwError> for Failure {
    fn from(e: ScwError) -> Self {
        match e {
            ScwError::Infeasible { .. } | ScwError::EmptyAcceptance { .. } => Failure::NoKey(e.to_string()),
            ScwError::Mismatch(_) => Failure::Check(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn io_failure(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Usage(format!("{}: {e}", path.display()))
}

/// What every output records so that a run can be repeated exactly.
#[derive(Debug, Serialize)]
struct Provenance {
    version: &'static str,
    command: Vec<String>,
    seed: u64,
    config_path: Option<PathBuf>,
    config: Option<String>,
}

struct Context {
    config: RunConfig,
    seed: u64,
    provenance: Provenance,
}

impl Context {
    fn load(common: &Common) -> Result<Self, Failure> {
        let config = match &common.config {
            Some(p) => RunConfig::load(p).map_err(Failure::Usage)?,
            None => RunConfig::defaults(),
        };
        let seed = common.seed.unwrap_or(config.seed);
        let provenance = Provenance {
            version: VERSION,
            command: std::env::args().collect(),
            seed,
            config_path: common.config.clone(),
            config: common.config.as_ref().map(|_| config.source.clone()),
        };
        Ok(Context {
            config,
            seed,
            provenance,
        })
    }

    fn channel(&self, loss_db: Option<f64>, xi: Option<f64>) -> Result<ChannelModel, Failure> {
        let loss = loss_db.unwrap_or(self.config.loss_db[0]);
        let xi = xi.unwrap_or(self.config.xi[0]);
        Ok(ChannelModel::new(loss, xi)?)
    }
}

fn block_for_mode(mode: Option<Mode>, n: Option<BlockSize>, configured: &[BlockSize]) -> Result<BlockSize, Failure> {
    match (mode, n) {
        (Some(Mode::Asymptotic), Some(BlockSize::Finite(_))) => {
            Err(Failure::Usage("--mode asymptotic contradicts a finite --n".into()))
        }
        (Some(Mode::Asymptotic), _) => Ok(BlockSize::Infinite),
        (Some(Mode::Finite), Some(BlockSize::Infinite)) => {
            Err(Failure::Usage("--mode finite needs a finite --n".into()))
        }
        (Some(Mode::Finite), Some(n)) => Ok(n),
        (Some(Mode::Finite), None) => configured
            .iter()
            .copied()
            .find(|n| *n != BlockSize::Infinite)
            .ok_or_else(|| Failure::Usage("--mode finite needs --n or a finite n in [finite_key]".into())),
        (None, n) => Ok(n.unwrap_or(BlockSize::Infinite)),
    }
}

#[derive(Debug, Serialize)]
struct KeyrateDocument<'a> {
    #[serde(flatten)]
    provenance: &'a Provenance,
    report: &'a KeyRateReport,
}

fn cmd_keyrate(args: &KeyrateArgs) -> Result<(), Failure> {
    let ctx = Context::load(&args.common)?;
    let ch = ctx.channel(args.loss_db, args.xi)?;
    let n = block_for_mode(args.mode, args.n, &ctx.config.n_values)?;
    let mut spec = ctx.config.sweep_spec(ctx.seed);
    spec.loss_grid = vec![ch.loss_db];
    spec.noise_levels = vec![ch.xi];
    spec.n_values = vec![n];
    let reports = sweep(&spec, &ctx.config.system)?;
    let report = &reports[0];
    let doc = output::json(&KeyrateDocument {
        provenance: &ctx.provenance,
        report,
    });
    print!("{doc}");
    if let Some(path) = args.out.as_ref().or(ctx.config.output.keyrate.as_ref()) {
        output::write_atomic(path, doc.as_bytes()).map_err(io_failure(path))?;
    }
    match report.status {
        PointStatus::Ok if report.rate > 0.0 => Ok(()),
        _ => Err(Failure::NoKey(
            report
                .message
                .clone()
                .unwrap_or_else(|| format!("no positive key rate at {} dB", ch.loss_db)),
        )),
    }
}

fn sweep_spec(args: &SweepArgs, ctx: &Context) -> Result<SweepSpec, Failure> {
    let mut spec = ctx.config.sweep_spec(ctx.seed);
    if let Some(l) = args.loss_db {
        spec.loss_grid = vec![l];
    }
    if let Some(x) = args.xi {
        spec.noise_levels = vec![x];
    }
    if let Some(n) = args.n {
        spec.n_values = vec![n];
    }
    match args.mode {
        Some(Mode::Asymptotic) => spec.n_values.retain(|n| *n == BlockSize::Infinite),
        Some(Mode::Finite) => spec.n_values.retain(|n| *n != BlockSize::Infinite),
        None => {}
    }
    if spec.n_values.is_empty() {
        return Err(Failure::Usage("the block-size grid is empty for this mode".into()));
    }
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Serialize)]
struct SweepMeta<'a> {
    #[serde(flatten)]
    provenance: &'a Provenance,
    complete: bool,
    rows: usize,
}

fn cmd_sweep(args: &SweepArgs, interrupted: &AtomicBool) -> Result<(), Failure> {
    let ctx = Context::load(&args.common)?;
    let spec = sweep_spec(args, &ctx)?;
    let out = args
        .out
        .clone()
        .or_else(|| ctx.config.output.sweep.clone())
        .ok_or_else(|| Failure::Usage("sweep needs --out or [output] sweep".into()))?;
    let meta_path = output::sibling(&out, ".meta.json");
    let mut sink = CsvSink::create(&out).map_err(io_failure(&out))?;
    let mut rows = 0;
    let write_meta = |complete: bool, rows: usize| {
        let meta = SweepMeta {
            provenance: &ctx.provenance,
            complete,
            rows,
        };
        output::write_json(&meta_path, &meta).map_err(io_failure(&meta_path))
    };

    let curves = spec.noise_levels.len() * spec.n_values.len();
    for batch in spec.loss_grid.chunks(LOSS_BATCH) {
        if interrupted.load(Ordering::SeqCst) {
            write_meta(false, rows)?;
            return Err(Failure::Interrupted(format!(
                "interrupted; {rows} complete rows in {}",
                out.display()
            )));
        }
        let part = SweepSpec {
            loss_grid: batch.to_vec(),
            ..spec.clone()
        };
        let reports = sweep(&part, &ctx.config.system)?;
        // curve-major from the optimizer, loss-major in the file
        let ordered: Vec<KeyRateReport> = (0..batch.len())
            .flat_map(|l| (0..curves).map(move |c| c * batch.len() + l))
            .map(|i| reports[i].clone())
            .collect();
        for r in ordered.iter().filter(|r| r.status == PointStatus::Failed) {
            eprintln!(
                "warning: {} dB, xi {}, n {}: {}",
                r.loss_db,
                r.xi,
                r.n,
                r.message.as_deref().unwrap_or("failed")
            );
        }
        sink.write_batch(&ordered).map_err(io_failure(&out))?;
        rows += ordered.len();
    }
    write_meta(true, rows)?;
    eprintln!("wrote {rows} rows to {}", out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct SimulationDocument<'a> {
    #[serde(flatten)]
    provenance: &'a Provenance,
    loss_db: f64,
    xi: f64,
    /// `config` or `optimized`.
    tunables_source: &'static str,
    tunables: TunableParams,
    stats: scw_qkd::EmpiricalStats,
    comparison: scw_qkd::simulate::ComparisonReport,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let ctx = Context::load(&args.common)?;
    let ch = ctx.channel(args.loss_db, args.xi)?;
    let sys = &ctx.config.system;
    let (tunables, source) = match ctx.config.tunables {
        Some(t) => (t, "config"),
        None => {
            let mut opts = ctx.config.search.clone();
            opts.seed = ctx.seed;
            (optimize_point(&ch, sys, &Objective::Asymptotic, &opts)?.params, "optimized")
        }
    };
    let stats = simulate_rounds(args.rounds, &tunables, sys, &ch, ctx.seed)?;
    let comparison = compare_analytic(&stats, &tunables, sys, &ch)?;
    let doc = output::json(&SimulationDocument {
        provenance: &ctx.provenance,
        loss_db: ch.loss_db,
        xi: ch.xi,
        tunables_source: source,
        tunables,
        stats,
        comparison,
    });
    print!("{doc}");
    if let Some(path) = args.out.as_ref().or(ctx.config.output.simulate.as_ref()) {
        output::write_atomic(path, doc.as_bytes()).map_err(io_failure(path))?;
    }
    comparison.verdict().map_err(Failure::from)
}

fn cmd_selftest() -> Result<(), Failure> {
    let checks = selftest::run();
    for c in &checks {
        println!(
            "{} {} (worst error {:.1e}, tolerance {:.1e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.worst_error,
            c.tolerance
        );
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Check(format!("{failed} of {} checks failed", checks.len())))
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("SCW_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::Usage(format!("SCW_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Usage(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match &cli.command {
        Command::Keyrate(a) => cmd_keyrate(a),
        Command::Sweep(a) => {
            let interrupted = Arc::new(AtomicBool::new(false));
            let flag = Arc::clone(&interrupted);
            // a second interrupt falls through to the default handler
            let _ = ctrlc::set_handler(move || {
                if flag.swap(true, Ordering::SeqCst) {
                    std::process::exit(130);
                }
                eprintln!("interrupt: finishing the current batch");
            });
            cmd_sweep(a, &interrupted)
        }
        Command::Simulate(a) => cmd_simulate(a),
        Command::Selftest => cmd_selftest(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("scwqkd: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
