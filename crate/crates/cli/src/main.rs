use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use symk::bounds::{hmax_bound, oracle_profile, Domain, DEFAULT_ORACLE_LIMIT};
use symk::triangle::{build_tiled_plan, TrianglePlan};
use symk::Mode;
use symk_cli::experiment::DEFAULT_COMPUTE_CAP;
use symk_cli::{run, sweep, write_csv, write_plot_data, Algo, BoundReport, ExperimentSpec};

/// Out-of-core SYRK and Cholesky schedules on a simulated two-level memory.
#[derive(Parser)]
#[command(name = "symk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and print its CSV row.
    Run(RunArgs),
    /// Run the cartesian product of the given parameter lists.
    Sweep(SweepArgs),
    /// Tabulate the exhaustive P(X) optimum against the closed-form bound.
    Certify(CertifyArgs),
    /// Show the triangle-block plan chosen at every recursion level.
    Plan(PlanArgs),
}

#[derive(Args)]
struct Common {
    /// Tile side for tbs-tiled.
    #[arg(long)]
    tile: Option<usize>,
    /// Block size for lbc (default floor(sqrt N)).
    #[arg(long)]
    block: Option<usize>,
    /// `count` replays the schedule only; `compute` also does the arithmetic and checks it.
    #[arg(long, default_value = "count")]
    mode: Mode,
    /// Seed for generated inputs in compute mode.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest number of matrix elements compute mode may allocate.
    #[arg(long, default_value_t = DEFAULT_COMPUTE_CAP)]
    compute_cap: usize,
    /// CSV destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// One of ref-syrk, ooc-syrk, tbs, tbs-tiled, ref-chol, ooc-chol, lbc.
    #[arg(long)]
    algo: Algo,
    #[arg(long)]
    n: usize,
    /// Columns of A (SYRK only).
    #[arg(long, default_value_t = 64)]
    m: usize,
    /// Fast-memory capacity S in elements.
    #[arg(long)]
    mem: usize,
    #[command(flatten)]
    common: Common,
    /// Input matrix file (dense A for SYRK, packed SPD A for Cholesky).
    #[arg(long)]
    in_matrix: Option<PathBuf>,
    /// Where to write the packed result (C or L).
    #[arg(long)]
    out_matrix: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',')]
    algo: Vec<Algo>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "64")]
    m: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    mem: Vec<usize>,
    #[command(flatten)]
    common: Common,
    /// Also write whitespace-separated ratio-vs-N data for plotting.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    n: u32,
    /// Iterations of the SYRK domain; ignored for Cholesky.
    #[arg(long, default_value_t = 1)]
    m: u32,
    /// `syrk` or `chol`.
    #[arg(long, default_value = "syrk")]
    domain: Domain,
    /// Refuse domains with more operations than this.
    #[arg(long, default_value_t = DEFAULT_ORACLE_LIMIT)]
    oracle_max_triples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    mem: usize,
    #[arg(long, default_value_t = 1)]
    tile: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn spec(algo: Algo, n: usize, m: usize, s: usize, common: &Common) -> ExperimentSpec {
    ExperimentSpec {
        mode: common.mode,
        seed: common.seed,
        tile: common.tile.filter(|_| algo == Algo::TbsTiled),
        block: common.block.filter(|_| algo == Algo::Lbc),
        compute_cap: common.compute_cap,
        ..ExperimentSpec::new(algo, n, m, s)
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let spec = ExperimentSpec {
        tile: args.common.tile,
        block: args.common.block,
        in_matrix: args.in_matrix,
        out_matrix: args.out_matrix,
        ..spec(args.algo, args.n, args.m, args.mem, &args.common)
    };
    let report = run(&spec)?;
    let mut out = output(args.common.out.as_deref())?;
    writeln!(out, "{}", BoundReport::CSV_HEADER)?;
    writeln!(out, "{}", report.csv_row())?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    let mut specs = Vec::new();
    for &algo in &args.algo {
        for &s in &args.mem {
            for &m in if algo.is_syrk() { &args.m[..] } else { &args.m[..args.m.len().min(1)] } {
                for &n in &args.n {
                    specs.push(spec(algo, n, m, s, &args.common));
                }
            }
        }
    }
    let results = sweep(&specs);
    let mut out = output(args.common.out.as_deref())?;
    let failed = write_csv(&mut out, &mut io::stderr().lock(), &specs, &results)?;
    if let Some(path) = &args.plot {
        let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        write_plot_data(&mut f, &results)?;
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_certify(args: CertifyArgs) -> Result<ExitCode> {
    let profile = oracle_profile(args.domain, args.n, args.m, args.oracle_max_triples)?;
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "X,oracle_max,hmax_bound,slack")?;
    let mut violations = 0;
    for x in 0..=profile.full_cost() {
        let best = profile.pmax(x);
        let bound = hmax_bound(x as f64);
        let slack = bound - best as f64;
        if slack < 0.0 {
            violations += 1;
        }
        writeln!(out, "{x},{best},{bound:.6},{slack:.6}")?;
    }
    out.flush()?;
    if violations > 0 {
        bail!("{violations} value(s) of X exceed the bound");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_plan(args: PlanArgs) -> Result<ExitCode> {
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "{}", TrianglePlan::CSV_HEADER)?;
    let mut n = args.n;
    loop {
        let plan = build_tiled_plan(n, args.mem, args.tile)?;
        writeln!(out, "{}", plan.csv_row())?;
        if plan.fallback {
            break;
        }
        n = plan.zone_rows();
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Certify(args) => cmd_certify(args),
        Command::Plan(args) => cmd_plan(args),
    }
}
