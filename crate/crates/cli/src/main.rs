use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use neurogsp::{Error, Result};
use neurogsp_cli::commands::{self, GroupFilter, Overrides};
use neurogsp_cli::config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "neurogsp", version, about = "Graph signal processing for decoding region-level brain signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Global seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 = all cores (overrides `jobs`).
    #[arg(long)]
    jobs: Option<usize>,
    /// Groups reported in the output tables.
    #[arg(long, default_value = "all")]
    group: GroupFilter,
}

#[derive(Subcommand)]
enum Command {
    /// Write every run of the simulated cohort as CSV files.
    Simulate(Common),
    /// Run both result tables, the accuracy curve and the statistics.
    Benchmark(Common),
    /// Accuracy versus number of retained dimensions.
    Curve(Common),
    /// Friedman and Wilcoxon tests on a per-subject accuracy table.
    Stats {
        /// Per-subject table, as written to `subjects.csv` by `benchmark`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Method column tested against every other one.
        #[arg(long)]
        focus: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "all")]
        group: GroupFilter,
    },
    /// Parse and validate a configuration, then print it fully resolved.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load(&c.config)?;
    commands::resolve(
        cfg,
        &Overrides {
            out: c.out.clone(),
            seed: c.seed,
            jobs: c.jobs,
        },
    )
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => commands::cmd_simulate(&load(&c)?),
        Command::Benchmark(c) => {
            let out = commands::cmd_benchmark(&load(&c)?, c.group)?;
            report_failures(&out.report);
            Ok(())
        }
        Command::Curve(c) => {
            let out = commands::cmd_curve(&load(&c)?, c.group)?;
            report_failures(&out.report);
            Ok(())
        }
        Command::Stats { input, out, focus, seed, group } => {
            for g in commands::cmd_stats(&input, &out, focus.as_deref(), group, seed)? {
                println!(
                    "{}: {} subjects, Friedman χ² = {:.3} (p = {:.3e})",
                    g.group, g.n_subjects, g.friedman_statistic, g.friedman_p
                );
                for c in &g.comparisons {
                    println!(
                        "  {} vs {}: z = {:.2}, p = {:.3e}, Bonferroni p = {:.3e}",
                        c.method_a, c.method_b, c.z, c.p_value, c.p_adjusted
                    );
                }
            }
            Ok(())
        }
        Command::ValidateConfig { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            print!("{}", cfg.to_toml());
            println!("# config_sha256: {}", cfg.hash());
            Ok(())
        }
    }
}

fn report_failures(report: &neurogsp::pipeline::ExperimentReport) {
    for f in &report.failures {
        eprintln!("warning: {} run {} failed and was excluded: {}", f.subject_id, f.run, f.message);
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
