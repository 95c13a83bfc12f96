//! `syncltv`: simulate coupled LTV and consensus arrays and check their
//! synchronization certificates.
//!
//! Exit codes: 0 when the run matches its expected outcome (or every check
//! passes), 1 on a mismatch, 2 on a configuration error, 3 on a numerical
//! failure.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use syncltv::graph::{matrix_to_rows, parse_matrix_text};
use syncltv::TimeKind;

use commands::{CmdResult, Failure, Finished};
use config::{CheckName, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "syncltv",
    version,
    about = "Synchronization of coupled linear time-varying arrays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario, write its trajectory and report, compare with the expected outcome.
    Simulate(SimulateArgs),
    /// Compute certificates: Lyapunov, stability bound, excitation, contraction, monodromy.
    Check(CheckArgs),
    /// Per-sample disagreement and energy of a stored trajectory.
    Plotdata(PlotArgs),
}

#[derive(Debug, Clone, Args)]
struct ScenarioArgs {
    /// Named scenario: harmonic, neg1, neg2, neg1-dt, neg2-dt, rotation-dt, random-consensus.
    #[arg(long)]
    scenario: Option<String>,
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of systems.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Largest integration step.
    #[arg(long)]
    step: Option<f64>,
    /// Final time, or number of steps in discrete time.
    #[arg(long)]
    horizon: Option<f64>,
    /// Truncation depth of the non-synchronizing constructions.
    #[arg(long)]
    k_max: Option<usize>,
    /// Whitespace-separated interconnection matrix, one row per line.
    #[arg(long)]
    inline_gamma: Option<PathBuf>,
    /// Treat a bare --inline-gamma matrix as a discrete (row-stochastic) one.
    #[arg(long)]
    discrete: bool,
    /// JSON report path.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    /// Trajectory CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Batch over seeds `a..b` (exclusive) or `a..=b`; output paths get a `.seedN` suffix.
    #[arg(long, conflicts_with = "seed")]
    seeds: Option<SeedRange>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    #[arg(long)]
    lyapunov: bool,
    #[arg(long)]
    stability: bool,
    /// Persistence of excitation scan.
    #[arg(long)]
    pe: bool,
    /// Sufficiency-of-excitation certificate.
    #[arg(long)]
    se: bool,
    #[arg(long)]
    contraction: bool,
    #[arg(long)]
    monodromy: bool,
    #[arg(long)]
    observability: bool,
    /// Window length for excitation and contraction checks.
    #[arg(long)]
    window: Option<f64>,
    /// Excitation level to require; defaults to a small floor (pe) or the
    /// smallest observed window level (contraction).
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Trajectory CSV written by `simulate --out`.
    trajectory: PathBuf,
    #[command(flatten)]
    common: ScenarioArgs,
    /// Output CSV path; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct SeedRange {
    start: u64,
    end: u64,
}

impl FromStr for SeedRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("expected a..b or a..=b, got '{s}'");
        let (a, b, inclusive) = match s.split_once("..=") {
            Some((a, b)) => (a, b, true),
            None => {
                let (a, b) = s.split_once("..").ok_or_else(bad)?;
                (a, b, false)
            }
        };
        let start: u64 = a.trim().parse().map_err(|_| bad())?;
        let end: u64 = b.trim().parse().map_err(|_| bad())?;
        let end = if inclusive { end + 1 } else { end };
        if end <= start {
            return Err(format!("empty seed range '{s}'"));
        }
        Ok(SeedRange { start, end })
    }
}

fn load_config(args: &ScenarioArgs) -> CmdResult<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if args.scenario.is_some() {
        cfg.scenario = args.scenario.clone();
    }
    cfg.p = args.p.or(cfg.p);
    cfg.seed = args.seed.or(cfg.seed);
    cfg.k_max = args.k_max.or(cfg.k_max);
    cfg.solver.step = args.step.or(cfg.solver.step);
    cfg.solver.horizon = args.horizon.or(cfg.solver.horizon);
    if args.report.is_some() {
        cfg.outputs.report = args.report.clone();
    }
    if args.discrete {
        cfg.kind = Some(TimeKind::Discrete);
    }
    if let Some(path) = &args.inline_gamma {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        cfg.interconnection = Some(matrix_to_rows(&parse_matrix_text(&text)?));
    }
    Ok(cfg)
}

fn with_suffix(path: &Path, seed: u64) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.seed{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}.seed{seed}"),
    };
    path.with_file_name(name)
}

fn report(result: CmdResult<Finished>, prefix: &str) -> u8 {
    match result {
        Ok(done) => {
            for line in &done.lines {
                println!("{prefix}{line}");
            }
            if done.ok {
                0
            } else {
                1
            }
        }
        Err(f) => {
            eprintln!("{prefix}error: {}", f.message());
            f.code()
        }
    }
}

fn run_simulate(args: SimulateArgs) -> u8 {
    let mut cfg = match load_config(&args.common) {
        Ok(c) => c,
        Err(f) => return report(Err(f), ""),
    };
    if args.out.is_some() {
        cfg.outputs.trajectory = args.out.clone();
    }
    let Some(range) = args.seeds else {
        return report(commands::simulate(&cfg), "");
    };
    let configs: Vec<RunConfig> = (range.start..range.end)
        .map(|seed| {
            let mut c = cfg.clone();
            c.seed = Some(seed);
            c.outputs.trajectory = cfg
                .outputs
                .trajectory
                .as_deref()
                .map(|p| with_suffix(p, seed));
            c.outputs.report = cfg.outputs.report.as_deref().map(|p| with_suffix(p, seed));
            c
        })
        .collect();
    let results: Vec<CmdResult<Finished>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| s.spawn(move || commands::simulate(c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });
    results
        .into_iter()
        .zip(range.start..range.end)
        .map(|(r, seed)| report(r, &format!("[seed {seed}] ")))
        .max()
        .unwrap_or(0)
}

fn run_check(args: CheckArgs) -> u8 {
    let mut cfg = match load_config(&args.common) {
        Ok(c) => c,
        Err(f) => return report(Err(f), ""),
    };
    let flags = [
        (args.lyapunov, CheckName::Lyapunov),
        (args.stability, CheckName::Stability),
        (args.pe, CheckName::Pe),
        (args.se, CheckName::Se),
        (args.contraction, CheckName::Contraction),
        (args.monodromy, CheckName::Monodromy),
        (args.observability, CheckName::Observability),
    ];
    for (on, name) in flags {
        if on && !cfg.checks.list.contains(&name) {
            cfg.checks.list.push(name);
        }
    }
    cfg.checks.window = args.window.or(cfg.checks.window);
    cfg.checks.eps = args.eps.or(cfg.checks.eps);
    report(commands::check(&cfg), "")
}

fn run_plotdata(args: PlotArgs) -> u8 {
    let cfg = match load_config(&args.common) {
        Ok(c) => c,
        Err(f) => return report(Err(f), ""),
    };
    report(
        commands::plotdata(&cfg, &args.trajectory, args.out.as_ref()),
        "",
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Check(args) => run_check(args),
        Command::Plotdata(args) => run_plotdata(args),
    };
    ExitCode::from(code)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(
            "2..5".parse::<SeedRange>().unwrap(),
            SeedRange { start: 2, end: 5 }
        );
        assert_eq!(
            "2..=5".parse::<SeedRange>().unwrap(),
            SeedRange { start: 2, end: 6 }
        );
        assert!("5..5".parse::<SeedRange>().is_err());
        assert!("x..3".parse::<SeedRange>().is_err());
    }

    #[test]
    fn seed_suffix() {
        assert_eq!(
            with_suffix(Path::new("out/run.csv"), 3),
            PathBuf::from("out/run.seed3.csv")
        );
        assert_eq!(with_suffix(Path::new("run"), 0), PathBuf::from("run.seed0"));
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
