//! Running experiment files.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use zoro::problems::ProblemSpec;
use zoro::rng::{derive_seed_path, tag};
use zoro::solver::{zoro_run, RunOutcome, RunStatus, RunTrace};

use crate::config::{ExperimentSpec, Method};
use crate::error::Result;
use crate::output::{self, objective_error};

/// One (method, repetition) run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub method: Method,
    pub repetition: usize,
    pub trace: RunTrace,
    /// Known optimal value used for `F_err`, if any.
    pub optimum: Option<f64>,
    /// First query count at which `F_err ≤ threshold·F_err(x0)`.
    pub queries_to_threshold: Option<u64>,
    pub trace_path: Option<PathBuf>,
}

impl RunResult {
    pub fn status(&self) -> RunStatus {
        self.trace.status
    }

    pub fn queries(&self) -> u64 {
        self.trace.records.last().map_or(0, |r| r.queries)
    }

    pub fn final_error(&self) -> f64 {
        let r = self.trace.records.last().expect("trace has a start record");
        objective_error(r.objective, r.objective_error, self.optimum)
    }

    /// Query count to threshold, or the total spent when never reached.
    pub fn censored_queries(&self) -> (u64, bool) {
        match self.queries_to_threshold {
            Some(q) => (q, false),
            None => (self.queries(), true),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub runs: Vec<RunResult>,
    pub out_dir: Option<PathBuf>,
    pub summary_path: Option<PathBuf>,
}

impl ExperimentReport {
    pub fn runs_for(&self, method: Method) -> impl Iterator<Item = &RunResult> {
        self.runs.iter().filter(move |r| r.method == method)
    }
}

/// First update whose `F_err` is at most `threshold` times the starting one.
pub fn queries_to_threshold(trace: &RunTrace, optimum: Option<f64>, threshold: f64) -> Option<u64> {
    let err = |r: &zoro::solver::IterationRecord| objective_error(r.objective, r.objective_error, optimum);
    let start = err(trace.records.first()?);
    trace
        .records
        .iter()
        .skip(1)
        .find(|r| err(r) <= threshold * start)
        .map(|r| r.queries)
}

/// Seed of the problem instance for a repetition, shared by all methods.
pub fn problem_seed(spec: &ExperimentSpec, rep: usize) -> u64 {
    derive_seed_path(spec.seed, &[tag("problem"), rep as u64])
}

pub fn build_problem(spec: &ExperimentSpec, rep: usize) -> Result<ProblemSpec> {
    spec.problem.build(problem_seed(spec, rep), spec.noise.effective_bound()?)
}

/// Runs one method on a prepared problem without writing anything.
pub fn run_one(spec: &ExperimentSpec, problem: &ProblemSpec, method: Method, rep: usize) -> Result<RunOutcome> {
    let d = problem.dimension();
    let rep_tag = rep as u64;
    let x0 = spec.start.point(d, derive_seed_path(spec.seed, &[tag("start"), rep_tag]))?;
    let noise = spec.noise.model(derive_seed_path(spec.seed, &[tag("noise"), rep_tag]))?;
    let reg = if spec.regularizer.applies_to(method) {
        spec.regularizer.build(d)?
    } else {
        zoro::regularizers::Regularizer::Zero
    };
    let mut cfg = spec.solver_config(method, derive_seed_path(spec.seed, &[tag("solver"), rep_tag]));
    if spec.stop_at_threshold {
        let optimum = problem.optimum_value().unwrap_or(0.0);
        let start = problem.exact_value(&x0)? + reg.penalty(&x0) - optimum;
        cfg.diagnostic_target = Some(optimum + spec.threshold * start);
    }
    Ok(zoro_run(problem, &noise, &reg, &x0, &cfg)?)
}

/// Runs every (method, repetition) pair in parallel. Traces go to
/// `{out_dir}/{method}_rep{r}.csv` and a per-run summary to
/// `{out_dir}/summary.csv` when `out_dir` is given.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: Option<&Path>) -> Result<ExperimentReport> {
    if let Some(dir) = out_dir {
        output::create_dir(dir)?;
    }
    let problems = (0..spec.repetitions)
        .into_par_iter()
        .map(|rep| build_problem(spec, rep))
        .collect::<Result<Vec<_>>>()?;
    let tasks: Vec<(usize, Method)> = (0..spec.repetitions)
        .flat_map(|rep| spec.methods.iter().map(move |&m| (rep, m)))
        .collect();
    let runs = tasks
        .into_par_iter()
        .map(|(rep, method)| {
            let problem = &problems[rep];
            let optimum = problem.optimum_value();
            let outcome = run_one(spec, problem, method, rep)?;
            let trace = outcome.trace;
            log::info!(
                "{method} rep {rep}: {} after {} queries, F = {}",
                trace.status.as_str(),
                trace.records.last().map_or(0, |r| r.queries),
                trace.final_objective
            );
            let trace_path = match out_dir {
                Some(dir) => {
                    let path = dir.join(format!("{method}_rep{rep}.csv"));
                    output::write_trace(&path, &trace, optimum)?;
                    Some(path)
                }
                None => None,
            };
            Ok(RunResult {
                method,
                repetition: rep,
                queries_to_threshold: queries_to_threshold(&trace, optimum, spec.threshold),
                optimum,
                trace,
                trace_path,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let summary_path = match out_dir {
        Some(dir) => {
            let path = dir.join("summary.csv");
            write_summary(&path, &runs)?;
            Some(path)
        }
        None => None,
    };
    Ok(ExperimentReport {
        runs,
        out_dir: out_dir.map(Path::to_path_buf),
        summary_path,
    })
}

pub const SUMMARY_HEADER: [&str; 9] = [
    "method",
    "repetition",
    "status",
    "iterations",
    "queries",
    "final_F",
    "final_F_err",
    "queries_to_threshold",
    "censored",
];

fn write_summary(path: &Path, runs: &[RunResult]) -> Result<()> {
    let rows = runs.iter().map(|r| {
        let (q, censored) = r.censored_queries();
        vec![
            r.method.to_string(),
            r.repetition.to_string(),
            r.status().as_str().to_string(),
            (r.trace.records.len() - 1).to_string(),
            r.queries().to_string(),
            r.trace.final_objective.to_string(),
            r.final_error().to_string(),
            q.to_string(),
            censored.to_string(),
        ]
    });
    output::write_csv(path, &SUMMARY_HEADER, rows)
}
