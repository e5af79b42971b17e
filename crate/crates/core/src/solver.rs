//! The proximal zeroth-order descent loop and its trace.

use nalgebra::DVector;

use crate::error::{Result, ZoroError};
use crate::estimators::{
    estimate_gradient_with, fdsa_gradient, opportunistic_estimate, spsa_gradient, EstimatorMethod, GradientEstimate,
    OppConfig, OppState,
};
use crate::problems::{NoiseModel, Oracle, ProblemSpec};
use crate::regularizers::Regularizer;
use crate::rng;
use crate::sensing::{self, DirectionSet};
use crate::sparse_recovery::CosampConfig;

/// Which gradient estimator drives the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    /// CoSaMP on a fixed direction set.
    Fixed,
    /// Reuses the previous support; the first round is [`EstimatorKind::Fixed`].
    Opportunistic,
    Fdsa,
    Spsa { batch: usize },
}

impl EstimatorKind {
    pub fn method(self) -> EstimatorMethod {
        match self {
            EstimatorKind::Fixed => EstimatorMethod::ZoroFixed,
            EstimatorKind::Opportunistic => EstimatorMethod::ZoroOpportunistic,
            EstimatorKind::Fdsa => EstimatorMethod::Fdsa,
            EstimatorKind::Spsa { .. } => EstimatorMethod::Spsa,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub sparsity: usize,
    /// Defaults to `1/L`; for SPSA to `1/(L(1 + (d−1)/batch))`.
    pub step_size: Option<f64>,
    /// Defaults to [`default_delta`] with the oracle's noise bound.
    pub delta: Option<f64>,
    pub b1: f64,
    /// Overrides [`default_m`].
    pub num_directions: Option<usize>,
    pub estimator: EstimatorKind,
    pub opportunistic: OppConfig,
    pub max_iterations: usize,
    pub query_budget: Option<u64>,
    /// Stop once the median of three oracle samples at the new iterate is at
    /// most this value. The samples are charged.
    pub target_value: Option<f64>,
    /// Stop once the exact objective (plus penalty) is at most this value.
    /// Diagnostic only: it spends no queries and does not change iterates.
    pub diagnostic_target: Option<f64>,
    /// Halve the step after three consecutive increases of the oracle value
    /// at the iterates.
    pub backtracking: bool,
    /// Start CoSaMP from the previous estimate.
    pub warm_start: bool,
    /// Keep every iterate in [`RunOutcome::iterates`].
    pub keep_iterates: bool,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(sparsity: usize) -> Self {
        SolverConfig {
            sparsity,
            step_size: None,
            delta: None,
            b1: 4.0,
            num_directions: None,
            estimator: EstimatorKind::Fixed,
            opportunistic: OppConfig::default(),
            max_iterations: 100,
            query_budget: None,
            target_value: None,
            diagnostic_target: None,
            backtracking: false,
            warm_start: false,
            keep_iterates: false,
            seed: 0,
        }
    }

    pub fn with_max_iterations(mut self, k: usize) -> Self {
        self.max_iterations = k;
        self
    }

    pub fn with_estimator(mut self, estimator: EstimatorKind) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn with_step_size(mut self, alpha: f64) -> Self {
        self.step_size = Some(alpha);
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.query_budget = Some(budget);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sparsity == 0 {
            return Err(ZoroError::InvalidArgument("sparsity must be at least 1".into()));
        }
        if let Some(a) = self.step_size {
            if !(a > 0.0 && a.is_finite()) {
                return Err(ZoroError::InvalidArgument(format!("step size must be positive, got {a}")));
            }
        }
        if let Some(dl) = self.delta {
            if !(dl > 0.0 && dl.is_finite()) {
                return Err(ZoroError::InvalidArgument(format!("sampling radius must be positive, got {dl}")));
            }
        }
        if !(self.b1 > 0.0 && self.b1.is_finite()) {
            return Err(ZoroError::InvalidArgument(format!("b1 must be positive, got {}", self.b1)));
        }
        if self.num_directions == Some(0) {
            return Err(ZoroError::InvalidArgument("direction count must be at least 1".into()));
        }
        if let EstimatorKind::Spsa { batch: 0 } = self.estimator {
            return Err(ZoroError::InvalidArgument("SPSA batch must be at least 1".into()));
        }
        if !(self.opportunistic.phi > 0.0 && self.opportunistic.phi <= 1.0) {
            return Err(ZoroError::InvalidArgument(format!(
                "phi must lie in (0, 1], got {}",
                self.opportunistic.phi
            )));
        }
        Ok(())
    }
}

/// Sampling radius `2√(σ/H)`, or `1e-4·max(1, scale)` when `σ = 0`.
pub fn default_delta(sigma: f64, h: f64, scale: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(ZoroError::InvalidArgument(format!("Hessian bound must be positive, got {h}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(ZoroError::InvalidArgument(format!("noise bound must be ≥ 0, got {sigma}")));
    }
    if sigma == 0.0 {
        Ok(fallback_delta(scale))
    } else {
        Ok(2.0 * (sigma / h).sqrt())
    }
}

/// Radius used without oracle noise: `1e-4·max(1, scale)`.
pub fn fallback_delta(scale: f64) -> f64 {
    1e-4 * scale.abs().max(1.0)
}

/// Direction count `⌈b1·s·ln(d/s)⌉` clamped to `[s+1, d]`; `d` when `s ≥ d`.
pub fn default_m(s: usize, d: usize, b1: f64) -> usize {
    if s >= d {
        return d;
    }
    let m = (b1 * s as f64 * (d as f64 / s as f64).ln()).ceil();
    let m = if m.is_finite() && m > 0.0 { m as usize } else { 0 };
    m.clamp(s + 1, d)
}

/// Seed of the sensing directions drawn by [`zoro_run`] for `cfg.seed`.
pub fn direction_seed(seed: u64) -> u64 {
    rng::derive_seed(seed, rng::tag("directions"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Iterations,
    Budget,
    Target,
    Divergence,
    OracleFailure,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Iterations => "iterations",
            RunStatus::Budget => "budget",
            RunStatus::Target => "target",
            RunStatus::Divergence => "divergence",
            RunStatus::OracleFailure => "oracle_failure",
        }
    }
}

/// State after `iter` updates. Record 0 is the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// Oracle queries spent so far.
    pub queries: u64,
    /// Exact `f(x) + r(x)`, with indicator regularizers counted as zero.
    pub objective: f64,
    /// `objective − f*` when the problem knows `f*`.
    pub objective_error: Option<f64>,
    /// `‖ĝ‖₂` of the estimate that produced this iterate.
    pub grad_norm: f64,
    pub support_size: usize,
    pub step_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub status: RunStatus,
    pub method: EstimatorMethod,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub step_size: f64,
    pub delta: f64,
    /// Number of sensing directions at the start of the run, 0 for the
    /// baselines.
    pub num_directions: usize,
    /// Message of the error that ended an [`RunStatus::OracleFailure`] run.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub x: DVector<f64>,
    pub trace: RunTrace,
    /// `x_0, x_1, …` when [`SolverConfig::keep_iterates`] is set, else empty.
    pub iterates: Vec<DVector<f64>>,
}

fn reported_objective(problem: &ProblemSpec, reg: &Regularizer, x: &DVector<f64>) -> Result<f64> {
    Ok(problem.exact_value(x)? + reg.penalty(x))
}

fn median3(mut v: [f64; 3]) -> f64 {
    v.sort_by(f64::total_cmp);
    v[1]
}

enum EstimatorState {
    Fixed { dirs: DirectionSet },
    Opportunistic { dirs: DirectionSet, state: Option<OppState> },
    Fdsa,
    Spsa { batch: usize, rng: rng::Rng },
}

/// Runs proximal zeroth-order descent from `x0`.
///
/// Oracle failures end the run early with [`RunStatus::OracleFailure`] and
/// the trace up to that point; invalid configuration is an error.
pub fn zoro_run(
    problem: &ProblemSpec,
    noise: &NoiseModel,
    reg: &Regularizer,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<RunOutcome> {
    cfg.validate()?;
    reg.validate()?;
    let d = problem.dimension();
    if x0.len() != d {
        return Err(ZoroError::DimensionMismatch { expected: d, got: x0.len() });
    }
    let mut oracle = Oracle::new(problem, noise)?;
    let sigma = if noise.is_noisy() { noise.bound } else { 0.0 };
    let delta = match cfg.delta {
        Some(dl) => dl,
        None if sigma == 0.0 => fallback_delta(x0.amax()),
        None => default_delta(sigma, problem.hessian_l1_bound(), x0.amax())?,
    };
    let alpha = match (cfg.step_size, cfg.estimator) {
        (Some(a), _) => a,
        (None, EstimatorKind::Spsa { batch }) => 1.0 / (problem.lipschitz() * (1.0 + (d as f64 - 1.0) / batch as f64)),
        (None, _) => 1.0 / problem.lipschitz(),
    };
    let m = cfg.num_directions.unwrap_or_else(|| default_m(cfg.sparsity, d, cfg.b1));
    let dir_seed = direction_seed(cfg.seed);
    let mut est_state = match cfg.estimator {
        EstimatorKind::Fixed => EstimatorState::Fixed {
            dirs: sensing::rademacher_directions(m, d, dir_seed)?,
        },
        EstimatorKind::Opportunistic => EstimatorState::Opportunistic {
            dirs: sensing::rademacher_directions(m, d, dir_seed)?,
            state: None,
        },
        EstimatorKind::Fdsa => EstimatorState::Fdsa,
        EstimatorKind::Spsa { batch } => EstimatorState::Spsa {
            batch,
            rng: rng::stream(rng::derive_seed(cfg.seed, rng::tag("spsa"))),
        },
    };
    let num_directions = match &est_state {
        EstimatorState::Fixed { dirs } | EstimatorState::Opportunistic { dirs, .. } => dirs.m(),
        _ => 0,
    };
    let growth_seed = rng::derive_seed(cfg.seed, rng::tag("growth"));

    // Indicator regularizers make an infeasible start feasible only after the
    // first prox, so the start is reported as given.
    let f0 = reported_objective(problem, reg, x0)?;
    let f_star = problem.optimum_value();
    let mut records = vec![IterationRecord {
        iter: 0,
        queries: 0,
        objective: f0,
        objective_error: f_star.map(|f| f0 - f),
        grad_norm: 0.0,
        support_size: 0,
        step_norm: 0.0,
    }];
    let divergence_level = 1e6 * (1.0 + f0.abs());
    let target_cost: u64 = match cfg.target_value {
        Some(_) if sigma > 0.0 => 3,
        Some(_) => 1,
        None => 0,
    };

    let mut x = x0.clone();
    let mut iterates = Vec::new();
    if cfg.keep_iterates {
        iterates.push(x.clone());
    }
    let mut step = alpha;
    let mut prev_g: Option<DVector<f64>> = None;
    let mut last_base: Option<f64> = None;
    let mut increases = 0usize;
    let mut failure = None;
    let mut status = RunStatus::Iterations;

    for k in 0..cfg.max_iterations {
        let round_cost = match &est_state {
            EstimatorState::Fixed { dirs } => dirs.m() as u64 + 1,
            EstimatorState::Opportunistic { dirs, state: None } => dirs.m() as u64 + 1,
            // Worst case of an opportunistic round.
            EstimatorState::Opportunistic { dirs, state: Some(_) } => dirs.m().max(d) as u64 + 1,
            EstimatorState::Fdsa => d as u64 + 1,
            EstimatorState::Spsa { batch, .. } => 2 * *batch as u64,
        };
        if let Some(budget) = cfg.query_budget {
            if oracle.queries() + round_cost + target_cost > budget {
                status = RunStatus::Budget;
                break;
            }
        }

        let estimate: Result<GradientEstimate> = match &mut est_state {
            EstimatorState::Fixed { dirs } => {
                let mut cc = CosampConfig::new(cfg.sparsity.min(d));
                if cfg.warm_start {
                    cc.init = prev_g.clone();
                }
                estimate_gradient_with(&mut oracle, &x, delta, dirs, &cc)
            }
            EstimatorState::Opportunistic { dirs, state } => match state.take() {
                None => {
                    let cc = CosampConfig::new(cfg.sparsity.min(d));
                    estimate_gradient_with(&mut oracle, &x, delta, dirs, &cc).and_then(|est| {
                        if !est.support.is_empty() {
                            *state = Some(OppState::new(dirs.clone(), est.support.clone(), growth_seed)?);
                        }
                        Ok(est)
                    })
                }
                Some(current) => {
                    opportunistic_estimate(&mut oracle, &x, current, delta, &cfg.opportunistic).map(|(est, next)| {
                        *dirs = next.dirs.clone();
                        *state = Some(next);
                        est
                    })
                }
            },
            EstimatorState::Fdsa => fdsa_gradient(&mut oracle, &x, delta),
            EstimatorState::Spsa { batch, rng } => spsa_gradient(&mut oracle, &x, delta, *batch, rng),
        };
        let estimate = match estimate {
            Ok(e) => e,
            Err(e) => {
                failure = Some(e.to_string());
                status = RunStatus::OracleFailure;
                break;
            }
        };

        if cfg.backtracking {
            if let (Some(prev), Some(now)) = (last_base, estimate.base_value) {
                increases = if now > prev { increases + 1 } else { 0 };
                if increases >= 3 {
                    step *= 0.5;
                    increases = 0;
                    log::debug!("iteration {k}: step halved to {step}");
                }
            }
            last_base = estimate.base_value;
        }

        let x_next = reg.prox(&(&x - &estimate.g_hat * step), step)?;
        let step_norm = (&x_next - &x).norm();
        x = x_next;
        if cfg.keep_iterates {
            iterates.push(x.clone());
        }
        let objective = match reported_objective(problem, reg, &x) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e.to_string());
                status = RunStatus::OracleFailure;
                break;
            }
        };

        let mut reached_target = false;
        if let Some(target) = cfg.target_value {
            let mut samples = [0.0; 3];
            for slot in samples.iter_mut().take(target_cost as usize) {
                match oracle.evaluate(&x) {
                    Ok(v) => *slot = v,
                    Err(e) => {
                        failure = Some(e.to_string());
                        break;
                    }
                }
            }
            if failure.is_some() {
                status = RunStatus::OracleFailure;
            } else {
                let value = if target_cost == 3 { median3(samples) } else { samples[0] };
                reached_target = value - target <= 0.0;
            }
        }

        records.push(IterationRecord {
            iter: k + 1,
            queries: oracle.queries(),
            objective,
            objective_error: f_star.map(|f| objective - f),
            grad_norm: estimate.g_hat.norm(),
            support_size: estimate.support.len(),
            step_norm,
        });
        if status == RunStatus::OracleFailure {
            break;
        }
        prev_g = Some(estimate.g_hat);

        if reached_target || cfg.diagnostic_target.is_some_and(|t| objective <= t) {
            status = RunStatus::Target;
            break;
        }
        if !objective.is_finite() || objective > divergence_level {
            status = RunStatus::Divergence;
            break;
        }
    }

    let final_objective = records.last().map_or(f0, |r| r.objective);
    Ok(RunOutcome {
        x,
        iterates,
        trace: RunTrace {
            records,
            status,
            method: cfg.estimator.method(),
            initial_objective: f0,
            final_objective,
            step_size: alpha,
            delta,
            num_directions,
            failure,
        },
    })
}
