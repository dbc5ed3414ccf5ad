use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use fdgr::cost::cost_report;
use fdgr::harness::checks::{self, CheckReport};
use fdgr::harness::run::{flooding_demo, write_csv, write_flood_csv, write_json};
use fdgr::harness::{sweep, ExperimentConfig};

#[derive(Parser)]
#[command(name = "fdgr", version, about = "Gradient regularization experiments on diagonal linear networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Train once per grid entry at a single seed.
    DlnRun {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Train every grid entry at every config seed.
    DlnSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Randomized identity checks; exits nonzero on failure.
    Check {
        #[command(subcommand)]
        suite: Suite,
    },
    /// Per-step loss, gradient norm and flip rate of a flooding run.
    FloodingDemo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Matrix multiplications per update for each GR method.
    CostModel {
        #[arg(long, value_delimiter = ',', required = true)]
        depths: Vec<u64>,
    },
}

#[derive(Subcommand)]
enum Suite {
    /// Forward differences on least squares do not depend on ε.
    LinearInvariance {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sign-flipping flooding steps equal a finite-difference GR step.
    FloodingIdentity {
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Unnormalized SAM equals GD with F-GR at γ = ε = ρ.
    SamIdentity {
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_path(path).with_context(|| format!("reading config {}", path.display()))
}

fn run_grid(cfg: &ExperimentConfig, seeds: &[u64], out: Option<&Path>, format: Format) -> Result<()> {
    let records = sweep(cfg, &cfg.grid, seeds)?;
    let mut w = open_out(out)?;
    match format {
        Format::Csv => write_csv(&records, &mut w)?,
        Format::Json => write_json(&records, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

fn print_reports(reports: &[CheckReport]) -> bool {
    for r in reports {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {}: {} cases, max rel err {:.3e} (tolerance {:.0e})", r.name, r.cases, r.max_rel_err, r.tolerance);
    }
    reports.iter().all(|r| r.passed)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::DlnRun { config, seed, out, format } => {
            let cfg = load(&config)?;
            run_grid(&cfg, &[seed.unwrap_or(cfg.seed)], out.as_deref(), format)?;
        }
        Command::DlnSweep { config, out, format } => {
            let cfg = load(&config)?;
            run_grid(&cfg, &cfg.seeds(), out.as_deref(), format)?;
        }
        Command::Check { suite } => {
            let reports = match suite {
                Suite::LinearInvariance { trials, seed } => checks::linear_invariance(trials, seed)?,
                Suite::FloodingIdentity { cases, seed } => vec![checks::flooding_identity(cases, seed)?],
                Suite::SamIdentity { cases, seed } => vec![checks::sam_identity(cases, seed)?],
            };
            return Ok(print_reports(&reports));
        }
        Command::FloodingDemo { config, out, seed } => {
            let cfg = load(&config)?;
            let trace = flooding_demo(&cfg, seed.unwrap_or(cfg.seed))?;
            let mut w = open_out(Some(&out))?;
            write_flood_csv(&trace, &mut w)?;
            w.flush()?;
        }
        Command::CostModel { depths } => {
            let rows = cost_report(&depths)?;
            let mut w = open_out(None)?;
            writeln!(w, "depth,plain_grad,fgr,bgr,db,db_over_fgr")?;
            for r in rows {
                let c = &r.counts;
                writeln!(w, "{},{},{},{},{},{:.6}", r.depth, c["plain_grad"], c["fgr"], c["bgr"], c["db"], r.db_over_fgr)?;
            }
            w.flush()?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
