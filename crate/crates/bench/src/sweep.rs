//! Queries-to-threshold as a function of dimension.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{ExperimentSpec, Method};
use crate::error::{BenchError, Result};
use crate::experiment::{run_experiment, ExperimentReport};
use crate::output;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub dimension: usize,
    pub method: Method,
    pub runs: usize,
    /// Runs that never reached the threshold; they count with the queries
    /// they spent.
    pub censored: usize,
    pub mean_queries: f64,
    /// Sample standard deviation, 0 for a single run.
    pub std_queries: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub path: Option<PathBuf>,
}

impl SweepReport {
    pub fn row(&self, dimension: usize, method: Method) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.dimension == dimension && r.method == method)
    }
}

pub const SWEEP_HEADER: [&str; 6] = ["dimension", "method", "runs", "censored", "mean_queries", "std_queries"];

fn summarize(dimension: usize, method: Method, report: &ExperimentReport) -> SweepRow {
    let samples: Vec<(u64, bool)> = report.runs_for(method).map(|r| r.censored_queries()).collect();
    let n = samples.len();
    let values: Vec<f64> = samples.iter().map(|(q, _)| *q as f64).collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    SweepRow {
        dimension,
        method,
        runs: n,
        censored: samples.iter().filter(|(_, c)| *c).count(),
        mean_queries: mean,
        std_queries: std,
    }
}

/// Runs `base` at every dimension in `dims`, stopping each run once the
/// objective error falls to `threshold` times its starting value. Per-run
/// traces go to `{out_dir}/d{dim}/` and the table to `{out_dir}/sweep.csv`.
pub fn dimension_sweep(
    base: &ExperimentSpec,
    dims: &[usize],
    threshold: f64,
    out_dir: Option<&Path>,
) -> Result<SweepReport> {
    if dims.is_empty() {
        return Err(BenchError::Usage("dimension list is empty".into()));
    }
    if let Some(&d) = dims.iter().find(|&&d| d < 2) {
        return Err(BenchError::Usage(format!("dimensions must be at least 2, got {d}")));
    }
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(BenchError::Usage(format!("threshold must be positive, got {threshold}")));
    }
    if let Some(dir) = out_dir {
        output::create_dir(dir)?;
    }
    let reports = dims
        .par_iter()
        .map(|&d| {
            let mut spec = base.clone();
            spec.problem = base.problem.with_dimension(d);
            spec.threshold = threshold;
            spec.stop_at_threshold = true;
            let sub = out_dir.map(|dir| dir.join(format!("d{d}")));
            run_experiment(&spec, sub.as_deref()).map(|r| (d, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<SweepRow> = reports
        .iter()
        .flat_map(|(d, report)| base.methods.iter().map(move |&m| summarize(*d, m, report)))
        .collect();
    let path = match out_dir {
        Some(dir) => {
            let path = dir.join("sweep.csv");
            let lines = rows.iter().map(|r| {
                vec![
                    r.dimension.to_string(),
                    r.method.to_string(),
                    r.runs.to_string(),
                    r.censored.to_string(),
                    r.mean_queries.to_string(),
                    r.std_queries.to_string(),
                ]
            });
            output::write_csv(&path, &SWEEP_HEADER, lines)?;
            Some(path)
        }
        None => None,
    };
    Ok(SweepReport { rows, path })
}
