use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use grushin_lab::{catalog, output_dir, run_to_dir, ExperimentConfig};

/// Environment variable that takes precedence over `--threads`.
const THREADS_ENV: &str = "GRUSHIN_LAB_THREADS";

#[derive(Parser)]
#[command(name = "grushin-lab", version, about = "Numerical experiments on the Grushin operator")]
struct Cli {
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the rayon pool.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Config override `key.path=value`, repeatable. The value is parsed as TOML.
    #[arg(long = "override", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// List the available experiments.
    List,
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, String> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| format!("{THREADS_ENV}={v:?} is not a positive integer")),
        Err(_) => Ok(flag),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match threads(cli.threads) {
        Ok(Some(n)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        }
        Ok(None) => {}
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match cli.command {
        Command::List => {
            print!("{}", catalog::listing());
            ExitCode::SUCCESS
        }
        Command::Run { config } => {
            let cfg = match ExperimentConfig::from_path(&config, &cli.overrides) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            let dir = output_dir(&cfg, cli.out.as_deref());
            match run_to_dir(&cfg, &dir) {
                Ok(report) => {
                    let passed = report.rows.iter().filter(|r| r.pass).count();
                    for r in report.rows.iter().filter(|r| !r.pass) {
                        eprintln!("FAIL {} / {} [{}]: {:e} vs {:e}", r.check, r.quantity, r.parameters, r.measured, r.target);
                    }
                    for w in &report.warnings {
                        eprintln!("warning: {w}");
                    }
                    println!("{}: {passed}/{} rows pass, output in {}", report.experiment, report.rows.len(), dir.display());
                    if report.all_pass() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
