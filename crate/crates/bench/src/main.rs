use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use zoro_bench::config::ExperimentSpec;
use zoro_bench::error::{BenchError, Result};
use zoro_bench::{experiment, huber, report, sweep, Overrides};

/// Zeroth-order optimization experiments.
#[derive(Debug, Parser)]
#[command(name = "zoro-bench", version)]
struct Cli {
    /// Master seed; overrides the experiment file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; defaults to the file's `out_dir`, else `out/<name>`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Query budget per run.
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// Oracle noise bound.
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every method and repetition of an experiment file.
    Run { spec: PathBuf },
    /// Sorted gradient magnitudes at random points of the file's problem.
    CompressReport {
        spec: PathBuf,
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
    /// Queries-to-threshold across dimensions.
    Sweep {
        spec: PathBuf,
        /// Comma-separated dimensions.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        /// Relative accuracy; defaults to the file's threshold.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Gradient descent on a Huber loss under adversarial noise.
    HuberDemo {
        /// Half-width of the quadratic core.
        #[arg(long, default_value_t = 0.1)]
        m: f64,
        #[arg(long, default_value_t = huber::DEFAULT_ITERATIONS)]
        iterations: usize,
    },
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            budget: self.budget,
            sigma: self.sigma,
        }
    }

    fn load(&self, path: &Path) -> Result<ExperimentSpec> {
        let mut spec = ExperimentSpec::from_path(path)?;
        self.overrides().apply(&mut spec)?;
        Ok(spec)
    }

    fn out_dir(&self, spec: Option<&ExperimentSpec>, fallback: &str) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| spec.and_then(|s| s.out_dir.clone()))
            .unwrap_or_else(|| Path::new("out").join(spec.map_or(fallback, |s| s.name.as_str())))
    }
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run { spec } => {
            let spec = cli.load(spec)?;
            let dir = cli.out_dir(Some(&spec), "experiment");
            let rep = experiment::run_experiment(&spec, Some(&dir))?;
            for method in &spec.methods {
                let runs: Vec<_> = rep.runs_for(*method).collect();
                let reached: Vec<u64> = runs.iter().filter_map(|r| r.queries_to_threshold).collect();
                let mean = reached.iter().sum::<u64>() as f64 / reached.len().max(1) as f64;
                log::info!(
                    "{method}: threshold reached in {}/{} runs, mean queries {mean}",
                    reached.len(),
                    runs.len()
                );
            }
            log::info!("wrote {}", dir.display());
        }
        Command::CompressReport { spec, points } => {
            let spec = cli.load(spec)?;
            let problem = experiment::build_problem(&spec, 0)?;
            let pts = report::random_points(problem.dimension(), *points, spec.seed);
            let dir = cli.out_dir(Some(&spec), "compress");
            let rep = report::compressibility_report(&problem, &pts, Some(&dir))?;
            let ps: Vec<f64> = rep.fits.iter().map(|f| f.exponent).filter(|p| p.is_finite()).collect();
            if !ps.is_empty() {
                log::info!("mean fitted exponent p = {}", ps.iter().sum::<f64>() / ps.len() as f64);
            }
            log::info!("wrote {}", dir.display());
        }
        Command::Sweep { spec, dims, threshold } => {
            let spec = cli.load(spec)?;
            let dir = cli.out_dir(Some(&spec), "sweep");
            let rep = sweep::dimension_sweep(&spec, dims, threshold.unwrap_or(spec.threshold), Some(&dir))?;
            for row in &rep.rows {
                log::info!(
                    "d = {} {}: mean {} ± {} ({} censored)",
                    row.dimension,
                    row.method,
                    row.mean_queries,
                    row.std_queries,
                    row.censored
                );
            }
            log::info!("wrote {}", dir.display());
        }
        Command::HuberDemo { m, iterations } => {
            let sigma = cli.sigma.unwrap_or(0.02);
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(BenchError::Usage(format!("--sigma must be ≥ 0, got {sigma}")));
            }
            let dir = cli.out_dir(None, "huber_demo");
            let rep = huber::huber_divergence_demo(*m, sigma, *iterations, cli.budget, Some(&dir))?;
            log::info!(
                "status {}, F from {} to {}",
                rep.trace.status.as_str(),
                rep.trace.initial_objective,
                rep.trace.final_objective
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = BenchError::Usage(e.kind().to_string());
            eprint!("{e}");
            eprintln!("{}", err.to_json_line());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.quiet { log::LevelFilter::Error } else { log::LevelFilter::Info })
        .parse_default_env()
        .format_target(false)
        .init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
