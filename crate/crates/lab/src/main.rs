use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nmps::config::{Overrides, RunConfig};
use nmps::core::pipeline::{variant_names, BaselineKind};
use nmps::{report, runner, Result};

#[derive(Parser)]
#[command(name = "nmps", version, about = "Pre-train, fine-tune and compare exploration variants")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-train (and fine-tune) one method for one ρ and seed.
    Run(RunArgs),
    /// Run every method × ρ × seed of the sweep section.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Parallel workers (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Aggregate a results directory into curves, a summary and a ranking.
    Report {
        /// Results directory written by `run` or `sweep`.
        #[arg(long = "in")]
        input: PathBuf,
        /// Where to write the report (default: `<in>/report`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print every variant and baseline name.
    ListVariants,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Variant or baseline name, e.g. `NMPS_X_sep^ex` or `APS`.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Pre-training steps.
    #[arg(long)]
    steps: Option<usize>,
    /// `fourrooms`, `open5` or `pointmass`.
    #[arg(long)]
    env: Option<String>,
    /// Output root (default: `$NMPS_OUT`, then `runs`).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        Overrides {
            variant: self.variant.clone(),
            rho: self.rho,
            seed: self.seed,
            steps: self.steps,
            env: self.env.clone(),
            out: self.out.clone(),
        }
        .apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.load()?;
            let (dir, m) = runner::run_single(&cfg)?;
            println!("{}", dir.display());
            println!(
                "coverage {} explore_fraction {:.4} final_return {}",
                m.coverage,
                m.explore_fraction,
                m.final_return.map_or("n/a".into(), |r| format!("{r:.4}"))
            );
            Ok(true)
        }
        Command::Sweep { run, workers } => {
            let mut cfg = run.load()?;
            if workers.is_some() {
                cfg.sweep.workers = workers;
                cfg.validate()?;
            }
            let results = runner::run_sweep(&cfg)?;
            let mut ok = true;
            for (job, res) in &results {
                match res {
                    Ok(_) => println!("ok     {} rho {} seed {}", job.method, job.rho, job.seed),
                    Err(e) => {
                        ok = false;
                        eprintln!("failed {} rho {} seed {}: {e}", job.method, job.rho, job.seed);
                    }
                }
            }
            Ok(ok)
        }
        Command::Report { input, out } => {
            let out = out.unwrap_or_else(|| input.join("report"));
            let r = report::report(&input, &out)?;
            print!("{}", r.ranking_text());
            for p in &r.incomplete {
                eprintln!("incomplete run skipped: {}", p.display());
            }
            Ok(true)
        }
        Command::ListVariants => {
            for n in variant_names() {
                println!("{n}");
            }
            for b in BaselineKind::all() {
                println!("{}", b.name());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
