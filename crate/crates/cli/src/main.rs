use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use euler_align_cli::config::ExperimentConfig;
use euler_align_cli::error::CliError;
use euler_align_cli::experiment::{prepare, run};
use euler_align_cli::output::{write_json, write_outcome};
use euler_align_cli::suites::{run_suite, Suite};
use euler_align_cli::sweep::{parse_values, run_sweep, write_sweep_csv, SweepParam};

#[derive(Parser)]
#[command(
    name = "euler-align",
    version,
    about = "Euler-alignment flocking experiments on the 1D torus"
)]
struct Cli {
    /// Directory for CSV and JSON artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Overrides the config seed; also seeds the randomized acceptance corpora.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and check it against its bounds.
    Simulate { config: PathBuf },
    /// Rerun a config over a list of values of one parameter.
    Sweep {
        config: PathBuf,
        /// sup_q0_fraction, sup_q0, lambda, mass, alpha, tau or n_cells.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
    },
    /// Run a pinned acceptance suite.
    Acceptance { suite: String },
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config } => {
            let config = load(&config, cli.seed)?;
            let outcome = run(prepare(&config)?);
            let (csv, report) = write_outcome(&outcome, &cli.out_dir)?;
            println!("wrote {} and {}", csv.display(), report.display());
            if let Some(summary) = &outcome.checks {
                for c in &summary.checks {
                    let tag = if c.passed { "PASS" } else { "FAIL" };
                    println!("{tag} {}: observed {:e}, bound {:e}", c.name, c.observed, c.bound);
                }
            } else if let Some(why) = &outcome.check_error {
                println!("checks skipped: {why}");
            }
            outcome.status()
        }
        Command::Sweep { config, param, values } => {
            let config = load(&config, cli.seed)?;
            let param: SweepParam = param.parse()?;
            let values = parse_values(&values)?;
            let rows = run_sweep(&config, param, &values);
            std::fs::create_dir_all(&cli.out_dir)?;
            let path = cli.out_dir.join(format!("sweep_{}_{}.csv", config.name, param.name()));
            write_sweep_csv(std::fs::File::create(&path)?, param, &rows)?;
            write_sweep_csv(std::io::stdout().lock(), param, &rows)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        Command::Acceptance { suite } => {
            let suite: Suite = suite.parse()?;
            let result = run_suite(suite, cli.seed.unwrap_or(0));
            for line in result.lines() {
                println!("{line}");
            }
            std::fs::create_dir_all(&cli.out_dir)?;
            let path = cli.out_dir.join(format!("acceptance_{}.json", suite.name()));
            write_json(&path, &result)?;
            if result.passed {
                Ok(())
            } else {
                Err(CliError::Acceptance(format!(
                    "{} of {} checks failed (details in {})",
                    result.failures(),
                    result.checks.len(),
                    path.display()
                )))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
