//! Objectives, the noisy zeroth-order oracle and query accounting.
//!
//! A [`ProblemSpec`] holds the noise-free objective `f` together with the
//! constants the algorithms rely on: the dimension `d`, the assumed noise bound
//! `σ`, the Hessian bound `H` (entrywise ℓ₁ norm of `∇²f`) and the gradient
//! Lipschitz constant `L`. Algorithms never call `f` directly; they go through
//! an [`Oracle`], which adds noise from a [`NoiseSource`] and charges every
//! evaluation to a [`QueryLedger`].

mod portfolio;
mod synthetic;

use std::fmt;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng as _;

use crate::error::{Result, ZoroError};
use crate::rng::{self, Rng};

pub use portfolio::{make_portfolio_oracle, AssetTable};
pub use synthetic::{
    make_compressible_quadratic, make_huber_demo, make_max_k_squared_sum,
    make_rotated_sparse_quadratic, make_sparse_quadratic, max_k_active_set, random_orthonormal,
};

pub type ObjectiveFn = dyn Fn(&DVector<f64>) -> Result<f64> + Send + Sync;
pub type GradientFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;

/// An objective and the smoothness/noise constants describing it.
#[derive(Clone)]
pub struct ProblemSpec {
    name: String,
    dimension: usize,
    noise_bound: f64,
    hessian_l1_bound: f64,
    lipschitz: f64,
    optimum_value: Option<f64>,
    objective: Arc<ObjectiveFn>,
    true_gradient: Option<Arc<GradientFn>>,
    gradient_audit: Arc<AtomicUsize>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("noise_bound", &self.noise_bound)
            .field("hessian_l1_bound", &self.hessian_l1_bound)
            .field("lipschitz", &self.lipschitz)
            .field("optimum_value", &self.optimum_value)
            .field("has_true_gradient", &self.true_gradient.is_some())
            .finish()
    }
}

impl ProblemSpec {
    pub fn new<F>(name: impl Into<String>, dimension: usize, lipschitz: f64, objective: F) -> Result<Self>
    where
        F: Fn(&DVector<f64>) -> Result<f64> + Send + Sync + 'static,
    {
        if dimension == 0 {
            return Err(ZoroError::InvalidSpec("dimension must be at least 1".into()));
        }
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(ZoroError::InvalidSpec(format!(
                "Lipschitz constant must be positive, got {lipschitz}"
            )));
        }
        Ok(Self {
            name: name.into(),
            dimension,
            noise_bound: 0.0,
            hessian_l1_bound: 0.0,
            lipschitz,
            optimum_value: None,
            objective: Arc::new(objective),
            true_gradient: None,
            gradient_audit: Arc::new(AtomicUsize::new(0)),
        })
    }

    pub fn with_noise_bound(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(ZoroError::InvalidSpec(format!("noise bound must be ≥ 0, got {sigma}")));
        }
        self.noise_bound = sigma;
        Ok(self)
    }

    pub fn with_hessian_bound(mut self, h: f64) -> Result<Self> {
        if !(h >= 0.0 && h.is_finite()) {
            return Err(ZoroError::InvalidSpec(format!("Hessian bound must be ≥ 0, got {h}")));
        }
        self.hessian_l1_bound = h;
        Ok(self)
    }

    pub fn with_optimum(mut self, f_star: f64) -> Self {
        self.optimum_value = Some(f_star);
        self
    }

    pub fn with_true_gradient<G>(mut self, gradient: G) -> Self
    where
        G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        self.true_gradient = Some(Arc::new(gradient));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Assumed bound σ on the oracle noise.
    pub fn noise_bound(&self) -> f64 {
        self.noise_bound
    }

    /// Bound H on the entrywise ℓ₁ norm of the Hessian.
    pub fn hessian_l1_bound(&self) -> f64 {
        self.hessian_l1_bound
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn optimum_value(&self) -> Option<f64> {
        self.optimum_value
    }

    pub fn has_true_gradient(&self) -> bool {
        self.true_gradient.is_some()
    }

    /// Noise-free objective value, outside of query accounting.
    ///
    /// Diagnostics only (traces, reports, tests). Algorithms query through an
    /// [`Oracle`].
    pub fn exact_value(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dimension(x)?;
        let v = (self.objective)(x)?;
        if !v.is_finite() {
            return Err(ZoroError::Evaluation {
                query: None,
                message: format!("objective `{}` returned {v}", self.name),
            });
        }
        Ok(v)
    }

    /// Exact gradient of a synthetic objective, if one is known.
    ///
    /// Every call is counted; see [`ProblemSpec::true_gradient_calls`].
    pub fn true_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let g = self.true_gradient.as_ref()?;
        self.gradient_audit.fetch_add(1, Ordering::Relaxed);
        Some(g(x))
    }

    /// Number of times [`ProblemSpec::true_gradient`] has been invoked on this
    /// problem or any of its clones.
    pub fn true_gradient_calls(&self) -> usize {
        self.gradient_audit.load(Ordering::Relaxed)
    }

    pub(crate) fn check_dimension(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dimension {
            return Err(ZoroError::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Monotone count of oracle evaluations.
#[derive(Debug, Default)]
pub struct QueryLedger {
    count: AtomicU64,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::SeqCst)
    }

    /// Charges one evaluation and returns its zero-based index.
    fn charge(&self) -> u64 {
        self.count.fetch_add(1, Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    None,
    /// ξ drawn uniformly from `[-σ, σ]`, independently per query.
    UniformBounded,
    /// Worst-case bounded noise against forward differences: `ξ = +σ` at the
    /// reference point of a finite-difference round and `ξ = -σ` at every
    /// other query. Every measured difference is shifted by `-2σ`.
    AdversarialSign,
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::None => "none",
            NoiseKind::UniformBounded => "uniform_bounded",
            NoiseKind::AdversarialSign => "adversarial_sign",
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = ZoroError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(NoiseKind::None),
            "uniform_bounded" | "uniform" => Ok(NoiseKind::UniformBounded),
            "adversarial_sign" | "adversarial" => Ok(NoiseKind::AdversarialSign),
            other => Err(ZoroError::InvalidArgument(format!("unknown noise kind `{other}`"))),
        }
    }
}

/// Description of the noise an oracle injects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub bound: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            bound: 0.0,
            seed: 0,
        }
    }

    pub fn uniform(bound: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::UniformBounded,
            bound,
            seed,
        }
    }

    pub fn adversarial(bound: f64) -> Self {
        Self {
            kind: NoiseKind::AdversarialSign,
            bound,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bound >= 0.0 && self.bound.is_finite()) {
            return Err(ZoroError::InvalidSpec(format!(
                "noise bound must be ≥ 0, got {}",
                self.bound
            )));
        }
        Ok(())
    }

    pub fn source(&self) -> Result<NoiseSource> {
        self.validate()?;
        Ok(NoiseSource {
            model: *self,
            rng: rng::stream(self.seed),
        })
    }

    /// True when evaluations at the same point can differ.
    pub fn is_noisy(&self) -> bool {
        self.kind != NoiseKind::None && self.bound > 0.0
    }
}

/// A [`NoiseModel`] together with its random stream.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    model: NoiseModel,
    rng: Rng,
}

impl NoiseSource {
    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    /// Draws ξ for a query; `reference` marks the base point of a
    /// finite-difference round.
    pub fn draw(&mut self, reference: bool) -> f64 {
        let sigma = self.model.bound;
        match self.model.kind {
            NoiseKind::None => 0.0,
            _ if sigma == 0.0 => 0.0,
            NoiseKind::UniformBounded => self.rng.random_range(-sigma..=sigma),
            NoiseKind::AdversarialSign => {
                if reference {
                    sigma
                } else {
                    -sigma
                }
            }
        }
    }
}

/// Evaluates `E_f(x) = f(x) + ξ` and charges one query to `ledger`.
pub fn evaluate(
    problem: &ProblemSpec,
    ledger: &QueryLedger,
    noise: &mut NoiseSource,
    x: &DVector<f64>,
) -> Result<f64> {
    evaluate_marked(problem, ledger, noise, x, false)
}

fn evaluate_marked(
    problem: &ProblemSpec,
    ledger: &QueryLedger,
    noise: &mut NoiseSource,
    x: &DVector<f64>,
    reference: bool,
) -> Result<f64> {
    problem.check_dimension(x)?;
    let index = ledger.charge();
    let value = (problem.objective)(x).map_err(|e| e.at_query(index))?;
    if !value.is_finite() {
        return Err(ZoroError::Evaluation {
            query: Some(index),
            message: format!("objective `{}` returned {value}", problem.name),
        });
    }
    Ok(value + noise.draw(reference))
}

/// A problem bundled with its ledger and noise source.
#[derive(Debug)]
pub struct Oracle<'p> {
    problem: &'p ProblemSpec,
    ledger: QueryLedger,
    noise: NoiseSource,
}

impl<'p> Oracle<'p> {
    pub fn new(problem: &'p ProblemSpec, noise: &NoiseModel) -> Result<Self> {
        Ok(Self {
            problem,
            ledger: QueryLedger::new(),
            noise: noise.source()?,
        })
    }

    pub fn noiseless(problem: &'p ProblemSpec) -> Self {
        Self {
            problem,
            ledger: QueryLedger::new(),
            noise: NoiseModel::none().source().expect("zero noise is valid"),
        }
    }

    pub fn problem(&self) -> &'p ProblemSpec {
        self.problem
    }

    pub fn dimension(&self) -> usize {
        self.problem.dimension
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    pub fn queries(&self) -> u64 {
        self.ledger.count()
    }

    pub fn noise_model(&self) -> &NoiseModel {
        self.noise.model()
    }

    pub fn evaluate(&mut self, x: &DVector<f64>) -> Result<f64> {
        evaluate_marked(self.problem, &self.ledger, &mut self.noise, x, false)
    }

    /// Evaluates the base point of a finite-difference round.
    pub fn evaluate_reference(&mut self, x: &DVector<f64>) -> Result<f64> {
        evaluate_marked(self.problem, &self.ledger, &mut self.noise, x, true)
    }
}
