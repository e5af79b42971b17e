//! Inexact gradient descent on a one-dimensional Huber loss.
//!
//! Adversarial noise shifts every forward difference by `−2σ/δ`. Once that
//! shift exceeds the largest slope `m` of the loss, the estimated gradient
//! points uphill everywhere outside a small neighbourhood of the minimizer
//! and the iterates walk away along the linear tail.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use zoro::problems::{make_huber_demo, NoiseModel};
use zoro::regularizers::Regularizer;
use zoro::solver::{zoro_run, RunTrace, SolverConfig};

use crate::error::Result;
use crate::output;

pub const DEFAULT_START: f64 = 1.0;
pub const DEFAULT_ITERATIONS: usize = 200;

#[derive(Debug, Clone)]
pub struct HuberReport {
    pub trace: RunTrace,
    pub path: Option<PathBuf>,
}

impl HuberReport {
    /// True when the run ended at or above its starting value.
    pub fn failed_to_descend(&self) -> bool {
        self.trace.final_objective >= self.trace.initial_objective
    }
}

/// Runs the fixed estimator from `x0 = 1` with adversarial noise of size
/// `sigma` (none when `sigma = 0`). The trace goes to
/// `{out_dir}/huber_demo.csv`.
pub fn huber_divergence_demo(
    m: f64,
    sigma: f64,
    iterations: usize,
    budget: Option<u64>,
    out_dir: Option<&Path>,
) -> Result<HuberReport> {
    let problem = make_huber_demo(m, sigma)?;
    let noise = if sigma > 0.0 {
        NoiseModel::adversarial(sigma)
    } else {
        NoiseModel::none()
    };
    if sigma > 0.0 && sigma <= m * m {
        log::info!("σ = {sigma} ≤ m² = {}; descent is expected to reach a plateau", m * m);
    }
    let mut cfg = SolverConfig::new(1).with_max_iterations(iterations);
    cfg.query_budget = budget;
    let x0 = DVector::from_element(1, DEFAULT_START);
    let trace = zoro_run(&problem, &noise, &Regularizer::Zero, &x0, &cfg)?.trace;
    let path = match out_dir {
        Some(dir) => {
            output::create_dir(dir)?;
            let path = dir.join("huber_demo.csv");
            output::write_trace(&path, &trace, Some(0.0))?;
            Some(path)
        }
        None => None,
    };
    Ok(HuberReport { trace, path })
}
