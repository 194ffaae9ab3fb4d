use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use drhe::experiment::{self, ExperimentConfig};

/// Dissipative-solution experiments for non-Newtonian flow on the periodic torus.
#[derive(Parser)]
#[command(name = "drhe", version)]
struct Cli {
    /// Experiment configuration file (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed of the random initial data; overrides `initial.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads. Outputs are reproducible for a fixed count.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Step one configuration to `time.T_final`, writing ledger and snapshots.
    Simulate,
    /// Sample the structural hypotheses of the rheology and tabulate its conjugate.
    VerifyRheology,
    /// Coarse runs against a strong reference, with relative-energy bounds.
    WeakStrong,
    /// Newtonian Taylor-Green decay for each viscosity in `experiment.mu_list`.
    TaylorGreen,
    /// Tabulate the stress potential conjugate on a log grid of `|S|`.
    ConjugateTable,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::VerifyRheology => "verify-rheology",
            Command::WeakStrong => "weak-strong",
            Command::TaylorGreen => "taylor-green",
            Command::ConjugateTable => "conjugate-table",
        }
    }
}

fn run(cli: &Cli) -> drhe::Result<bool> {
    experiment::configure_threads(cli.threads)?;
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::from_text("")?,
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| cfg.output.directory.join(cli.command.name()));
    let out = out.as_path();
    Ok(match cli.command {
        Command::Simulate => report_simulate(&cfg, out)?,
        Command::VerifyRheology => {
            let s = experiment::run_verify_rheology(&cfg, out)?;
            let v = &s.report.verdict;
            println!(
                "fenchel_young={} convexity={} conjugate_ball={} linear_growth={}",
                v.fenchel_young, v.convexity, v.conjugate_ball, v.linear_growth
            );
            s.passed()
        }
        Command::WeakStrong => {
            let o = experiment::run_weak_strong(&cfg, out)?;
            for row in &o.table {
                println!("N={} sup_E={:e} bound_ok={}", row.n, row.sup_energy, row.bound_ok);
            }
            println!("verdict={} monotone={} min_ratio={:?}", o.verdict, o.monotone, o.min_ratio);
            o.consistent()
        }
        Command::TaylorGreen => {
            let s = experiment::run_taylor_green(&cfg, out)?;
            for r in &s.rows {
                println!("mu={} rel_err={:e} certificate_ok={}", r.mu, r.rel_err, r.certificate_ok);
            }
            s.passed()
        }
        Command::ConjugateTable => {
            let rows = experiment::run_conjugate_table(&cfg, out)?;
            println!("{} rows written to {}", rows.len(), out.display());
            true
        }
    })
}

fn report_simulate(cfg: &ExperimentConfig, out: &Path) -> drhe::Result<bool> {
    let s = experiment::run_simulate(cfg, out)?;
    println!(
        "steps={} t={} dt_min={:?} max_gap={:e} certificate={} regularity={}",
        s.steps,
        s.final_time,
        s.dt_min,
        s.max_gap,
        s.certificate.passed(),
        s.regularity.label()
    );
    Ok(s.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("drhe {}: certificate violation", cli.command.name());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("drhe {}: {e}", cli.command.name());
            ExitCode::from(1)
        }
    }
}
