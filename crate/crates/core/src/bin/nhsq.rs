use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use nhsq::experiments::{self, resolve_out_dir, ExperimentConfig, EXPERIMENTS};

/// Square-function experiments on non-doubling measures.
#[derive(Parser)]
#[command(name = "nhsq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write report.json and series.csv.
    Run {
        experiment: String,
        /// TOML file with config overrides.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of generations in the norm series.
        #[arg(long)]
        depth: Option<usize>,
        /// Comma-separated apertures, e.g. `1,1.5,2`.
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
        /// Output directory; overrides NHSQ_OUT and the config file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write series.svg.
        #[arg(long)]
        svg: bool,
    },
    /// List the available experiments.
    List,
    /// Parse and check a config file without running anything.
    ValidateConfig { path: PathBuf },
}

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for e in EXPERIMENTS {
                println!("{:<18} {}", e.name, e.description);
            }
            ExitCode::SUCCESS
        }
        Command::ValidateConfig { path } => match ExperimentConfig::load(&path).and_then(|c| c.validate().map(|_| c)) {
            Ok(c) => {
                println!("{}: ok (experiment `{}`)", path.display(), c.experiment);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_USAGE)
            }
        },
        Command::Run { experiment, config, seed, depth, alpha, out, svg } => {
            let mut cfg = match &config {
                Some(p) => match ExperimentConfig::load(p) {
                    Ok(c) => c,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(EXIT_USAGE);
                    }
                },
                None => ExperimentConfig::default(),
            };
            cfg.experiment = experiment;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(d) = depth {
                cfg.generations = d;
            }
            if let Some(a) = alpha {
                cfg.alphas = a;
            }
            if let Err(e) = cfg.validate() {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_USAGE);
            }
            let env = std::env::var("NHSQ_OUT").ok();
            let dir = resolve_out_dir(out.as_deref(), env.as_deref(), &cfg);

            let start = Instant::now();
            let report = match experiments::run(&cfg) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_FAIL);
                }
            };
            let elapsed = start.elapsed().as_secs_f64();
            let paths = match experiments::write_outputs(&report, &dir, svg) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_FAIL);
                }
            };
            for v in &report.verdicts {
                println!("{} {}", v.id, if v.passed { "PASS" } else { "FAIL" });
                for c in &v.checks {
                    let mark = if c.passed { "ok" } else { "FAILED" };
                    println!("    {mark:<6} {}: {:.6e} (bound {:.6e})", c.name, c.value, c.bound);
                }
            }
            println!("wrote {}", paths.report.display());
            eprintln!("runtime: {elapsed:.3} s");
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAIL)
            }
        }
    }
}
