use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nlprec_cli::commands::{cmd_ingest, cmd_run, cmd_sweep, cmd_verify, parse_grid, GlobalOptions};
use nlprec_cli::config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "nlprec", version, about = "Run, sweep and verify nonlinearly preconditioned gradient methods")]
struct Cli {
    /// Worker threads for seeds, grid points and suites
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory (overrides the config's output_dir)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Added to every seed
    #[arg(long, global = true, default_value_t = 0)]
    seed_offset: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every seed of a config and write one trace CSV per seed
    Run { config: PathBuf },
    /// Cross product of a config with a gamma/beta grid
    Sweep {
        config: PathBuf,
        /// PARAM=V1,V2,... with PARAM in {gamma, beta}; repeatable
        #[arg(long)]
        grid: Vec<String>,
    },
    /// Run certificate suites by name, or `all`
    Verify {
        suites: Vec<String>,
        /// Perturb every kernel's dual derivative to exercise failure reporting
        #[arg(long)]
        inject_fault: bool,
    },
    /// Validate a MovieLens u.data file and summarise it
    IngestMovielens { path: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = GlobalOptions {
        out: cli.out,
        jobs: cli.jobs,
        seed_offset: cli.seed_offset,
    };
    match execute(cli.command, &opts) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command, opts: &GlobalOptions) -> anyhow::Result<bool> {
    match command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let summary = cmd_run(&cfg, opts)?;
            for r in &summary.runs {
                let status = match (&r.abort, &r.error) {
                    (_, Some(e)) => format!("error: {e}"),
                    (Some(a), None) => format!("aborted: {a}"),
                    (None, None) => "ok".into(),
                };
                println!("{} seed={} final_f={:e} {status}", r.label, r.seed, r.final_f);
            }
            for c in &summary.certificates {
                println!("{c}");
            }
            println!("wrote {}", summary.out_dir.display());
            Ok(summary.success())
        }
        Command::Sweep { config, grid } => {
            let cfg = ExperimentConfig::load(&config)?;
            let axes = parse_grid(&grid)?;
            let summary = cmd_sweep(&cfg, &axes, opts)?;
            for (rank, e) in summary.entries.iter().enumerate() {
                println!("{:>3} {} mean_final_f={:e}", rank + 1, e.label, e.mean_final_f);
            }
            println!("wrote {}", summary.out_dir.display());
            Ok(summary.success())
        }
        Command::Verify { suites, inject_fault } => {
            let summary = cmd_verify(&suites, inject_fault, opts)?;
            for c in summary.certificates() {
                println!("{c}");
            }
            println!("wrote {}", summary.report.display());
            Ok(summary.success())
        }
        Command::IngestMovielens { path } => {
            let s = cmd_ingest(&path, opts)?;
            println!(
                "users={} items={} ratings={} mean_rating={:.4}",
                s.users, s.items, s.ratings, s.mean_rating
            );
            Ok(true)
        }
    }
}
