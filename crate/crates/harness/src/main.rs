use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vqa_core::hamiltonian::{IsingModel, IsingParams};
use vqa_harness::{run_experiment, summarize, ExperimentConfig, HarnessError, RunOptions};

/// Energy-landscape experiments for layered RY/CZ circuits.
#[derive(Debug, Parser)]
#[command(name = "vqa-lab", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "VQA_LAB_THREADS")]
    threads: Option<usize>,
    /// Report errors on stderr as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory.
        #[arg(long, env = "VQA_LAB_OUT")]
        out: Option<PathBuf>,
        /// Continue an interrupted run in the same output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Aggregate figure data from a result directory.
    Summarize {
        dir: PathBuf,
        /// Panel id (fig1a … fig9b) or `all`.
        panel: String,
    },
    /// Run the derivative cross-checks and theorem suites at small sizes.
    Verify {
        /// Only this theorem (1, 2 or 3).
        #[arg(long)]
        theorem: Option<u8>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exact ground energy of the transverse-field Ising chain.
    GroundEnergy {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        j: f64,
        #[arg(long, default_value_t = 1.0)]
        g: f64,
        /// Open chain instead of a ring.
        #[arg(long)]
        open: bool,
    },
}

fn read_config(path: &PathBuf) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    ExperimentConfig::from_json(&text)
}

fn execute(cli: Cli) -> Result<ExitCode, HarnessError> {
    if let Some(t) = cli.threads {
        // the run command builds its own pool; this one serves the rest
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match cli.command {
        Command::Run { config, seed, out, resume } => {
            let mut cfg = read_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            let summary = run_experiment(&cfg, &RunOptions { threads: cli.threads, resume, max_tasks: None })?;
            eprintln!(
                "{}: {} tasks, {} already done, {} run",
                summary.output_dir.display(),
                summary.total,
                summary.skipped,
                summary.executed
            );
        }
        Command::Summarize { dir, panel } => {
            let panels: Vec<String> = if panel == "all" {
                vqa_harness::summarize::panel_ids().map(String::from).collect()
            } else {
                vec![panel]
            };
            for p in panels {
                let t = summarize(&dir, &p)?;
                eprintln!("{p}: {} rows, {} gaps", t.rows.len(), t.gaps.len());
                for g in &t.gaps {
                    eprintln!("  gap: cell {} ({}): {}", g.cell, g.label, g.reason);
                }
            }
        }
        Command::Verify { theorem, seed } => {
            if matches!(theorem, Some(t) if !(1..=3).contains(&t)) {
                return Err(HarnessError::Config("--theorem must be 1, 2 or 3".into()));
            }
            let report = vqa_harness::verify::verify(theorem, seed)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            if !report.pass {
                return Ok(ExitCode::from(1));
            }
        }
        Command::GroundEnergy { n, j, g, open } => {
            let model = IsingModel::from_params(IsingParams { n, j, g, periodic: !open })?;
            println!("{}", model.ground_energy()?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let json = std::env::args().any(|a| a == "--json");
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = HarnessError::Config(e.to_string().trim().to_string());
            if json {
                eprintln!("{}", err.to_json());
            } else {
                let _ = e.print();
            }
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            if json {
                eprintln!("{}", e.to_json());
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
