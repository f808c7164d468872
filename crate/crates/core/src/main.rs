use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use splice_lab::error::Error;
use splice_lab::harness::config::{Experiment, ExperimentConfig};
use splice_lab::harness::experiments::run_experiment;
use splice_lab::harness::report::write_artifacts;
use splice_lab::harness::selftest::run_selftest;

#[derive(Parser)]
#[command(name = "splice-lab", version, about = "Numerical checks of cylindrical splicing and the nonlinear filled section")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment (or `all`) from a `key = value` config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's `experiment`.
        #[arg(long)]
        experiment: Option<String>,
        /// Also write SVG decay plots.
        #[arg(long)]
        plots: bool,
        /// Overrides the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quick identities that hold by construction.
    Selftest,
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("SPLICE_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| format!("SPLICE_LAB_THREADS = {raw:?} is not a positive integer"))?;
    if n == 0 {
        return Err("SPLICE_LAB_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn load(config: &Path, experiment: Option<String>, out: Option<PathBuf>) -> splice_lab::error::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(name) = experiment {
        cfg.experiment = name.parse::<Experiment>()?;
    }
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(config: PathBuf, experiment: Option<String>, plots: bool, out: Option<PathBuf>) -> ExitCode {
    let cfg = match load(&config, experiment, out) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    println!("snapped R: {:?}", cfg.snapped_r_list());
    let start = Instant::now();
    let outcomes = match run_experiment(&cfg) {
        Ok(o) => o,
        Err(e @ Error::Config(_)) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            eprintln!("experiment failed: {e}");
            return ExitCode::from(EXIT_FAIL);
        }
    };
    for o in &outcomes {
        for c in &o.checks {
            let verdict = if c.pass { "PASS" } else { "FAIL" };
            println!("{verdict} {}/{}: measured {:e}, threshold {:e} ({})", o.experiment, c.name, c.measured, c.threshold, c.detail);
        }
    }
    match write_artifacts(&cfg.output_dir, &cfg, &outcomes, plots) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("could not write artifacts: {e}");
            return ExitCode::from(EXIT_FAIL);
        }
    }
    println!("elapsed {:.1} s", start.elapsed().as_secs_f64());
    if outcomes.iter().all(|o| o.pass()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

fn selftest() -> ExitCode {
    let mut ok = true;
    for c in run_selftest() {
        match c.result {
            Ok(true) => println!("PASS {}", c.name),
            Ok(false) => {
                ok = false;
                println!("FAIL {}", c.name);
            }
            Err(e) => {
                ok = false;
                println!("FAIL {}: {e}", c.name);
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("{e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match cli.command {
        Command::Run { config, experiment, plots, out } => run(config, experiment, plots, out),
        Command::Selftest => selftest(),
    }
}
