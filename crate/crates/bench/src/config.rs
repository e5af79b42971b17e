//! Experiment files.
//!
//! An experiment is a TOML document that maps one-to-one onto
//! [`ExperimentSpec`]. Unknown keys are rejected so that typos surface at
//! parse time. See `experiments/` in the repository for complete files and
//! the README for the grammar.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DVector;
use serde::Deserialize;
use zoro::estimators::OppConfig;
use zoro::problems::{
    make_compressible_quadratic, make_huber_demo, make_max_k_squared_sum, make_portfolio_oracle,
    make_rotated_sparse_quadratic, make_sparse_quadratic, AssetTable, NoiseKind, NoiseModel, ProblemSpec,
};
use zoro::regularizers::Regularizer;
use zoro::rng;
use zoro::solver::{EstimatorKind, SolverConfig};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ZoroFixed,
    ZoroOpportunistic,
    Fdsa,
    Spsa,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::ZoroFixed, Method::ZoroOpportunistic, Method::Fdsa, Method::Spsa];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::ZoroFixed => "zoro_fixed",
            Method::ZoroOpportunistic => "zoro_opportunistic",
            Method::Fdsa => "fdsa",
            Method::Spsa => "spsa",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| BenchError::Usage(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemDesc {
    SparseQuadratic {
        dimension: usize,
        sparsity: usize,
        seed: Option<u64>,
    },
    CompressibleQuadratic {
        dimension: usize,
        omega: f64,
    },
    MaxKSquaredSum {
        dimension: usize,
        k: usize,
    },
    RotatedSparseQuadratic {
        dimension: usize,
        density: f64,
        seed: Option<u64>,
    },
    Huber {
        m: f64,
    },
    Portfolio {
        /// Required unless `assets_dir` is given.
        dimension: Option<usize>,
        /// Directory holding `means.csv`, `stddevs.csv` and `correlations.csv`.
        assets_dir: Option<PathBuf>,
        lambda: f64,
        return_target: f64,
        seed: Option<u64>,
        /// Known optimal value, used for `F_err`.
        optimum: Option<f64>,
    },
}

impl ProblemDesc {
    pub fn dimension(&self) -> usize {
        match self {
            ProblemDesc::SparseQuadratic { dimension, .. }
            | ProblemDesc::CompressibleQuadratic { dimension, .. }
            | ProblemDesc::MaxKSquaredSum { dimension, .. }
            | ProblemDesc::RotatedSparseQuadratic { dimension, .. } => *dimension,
            ProblemDesc::Huber { .. } => 1,
            ProblemDesc::Portfolio { dimension, .. } => dimension.unwrap_or(0),
        }
    }

    /// Copy with the dimension replaced, for sweeps.
    pub fn with_dimension(&self, d: usize) -> Self {
        let mut out = self.clone();
        match &mut out {
            ProblemDesc::SparseQuadratic { dimension, .. }
            | ProblemDesc::CompressibleQuadratic { dimension, .. }
            | ProblemDesc::MaxKSquaredSum { dimension, .. }
            | ProblemDesc::RotatedSparseQuadratic { dimension, .. } => *dimension = d,
            ProblemDesc::Portfolio { dimension, .. } => *dimension = Some(d),
            ProblemDesc::Huber { .. } => {}
        }
        out
    }

    /// Sparsity used when the solver section does not set one.
    pub fn natural_sparsity(&self) -> usize {
        let d = self.dimension().max(1);
        match self {
            ProblemDesc::SparseQuadratic { sparsity, .. } => *sparsity,
            ProblemDesc::MaxKSquaredSum { k, .. } => *k,
            ProblemDesc::Huber { .. } => 1,
            _ => d.div_ceil(10),
        }
    }

    /// Builds the problem instance. `seed` is used by random instances that do
    /// not pin their own seed.
    pub fn build(&self, seed: u64, noise_bound: f64) -> Result<ProblemSpec> {
        let p = match self {
            ProblemDesc::SparseQuadratic {
                dimension,
                sparsity,
                seed: own,
            } => make_sparse_quadratic(*dimension, *sparsity, own.unwrap_or(seed))?,
            ProblemDesc::CompressibleQuadratic { dimension, omega } => make_compressible_quadratic(*dimension, *omega)?,
            ProblemDesc::MaxKSquaredSum { dimension, k } => make_max_k_squared_sum(*dimension, *k)?,
            ProblemDesc::RotatedSparseQuadratic {
                dimension,
                density,
                seed: own,
            } => make_rotated_sparse_quadratic(*dimension, *density, own.unwrap_or(seed))?,
            ProblemDesc::Huber { m } => return Ok(make_huber_demo(*m, noise_bound)?),
            ProblemDesc::Portfolio {
                dimension,
                assets_dir,
                lambda,
                return_target,
                seed: own,
                optimum,
            } => {
                let table = match (assets_dir, dimension) {
                    (Some(dir), _) => AssetTable::from_dir(dir)?,
                    (None, Some(d)) => AssetTable::synthetic(*d, own.unwrap_or(seed))?,
                    (None, None) => {
                        return Err(BenchError::Usage("portfolio needs `dimension` or `assets_dir`".into()));
                    }
                };
                let p = make_portfolio_oracle(&table, *lambda, *return_target)?;
                match optimum {
                    Some(f) => p.with_optimum(*f),
                    None => p,
                }
            }
        };
        Ok(p.with_noise_bound(noise_bound)?)
    }
}

/// A bound given either as one value for every coordinate or per coordinate.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Bound {
    fn expand(&self, d: usize) -> Result<DVector<f64>> {
        match self {
            Bound::Scalar(v) => Ok(DVector::from_element(d, *v)),
            Bound::Vector(v) if v.len() == d => Ok(DVector::from_column_slice(v)),
            Bound::Vector(v) => Err(BenchError::Usage(format!("bound has {} entries, expected {d}", v.len()))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerKind {
    #[default]
    Zero,
    Nonneg,
    Box,
    L1,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizerDesc {
    #[serde(default)]
    pub kind: RegularizerKind,
    pub lambda: Option<f64>,
    pub lower: Option<Bound>,
    pub upper: Option<Bound>,
    /// Methods that use the regularizer; all methods when absent.
    pub apply_to: Option<Vec<Method>>,
}

impl RegularizerDesc {
    pub fn applies_to(&self, method: Method) -> bool {
        self.apply_to.as_ref().is_none_or(|list| list.contains(&method))
    }

    pub fn build(&self, d: usize) -> Result<Regularizer> {
        Ok(match self.kind {
            RegularizerKind::Zero => Regularizer::Zero,
            RegularizerKind::Nonneg => Regularizer::NonNeg,
            RegularizerKind::L1 => Regularizer::l1(
                self.lambda
                    .ok_or_else(|| BenchError::Usage("l1 regularizer needs `lambda`".into()))?,
            )?,
            RegularizerKind::Box => {
                let lower = self.lower.as_ref().map_or(Ok(DVector::from_element(d, f64::NEG_INFINITY)), |b| b.expand(d))?;
                let upper = self.upper.as_ref().map_or(Ok(DVector::from_element(d, f64::INFINITY)), |b| b.expand(d))?;
                Regularizer::boxed(lower, upper)?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseDesc {
    #[serde(default = "default_noise_kind")]
    pub kind: String,
    #[serde(default)]
    pub bound: f64,
}

fn default_noise_kind() -> String {
    "none".into()
}

impl Default for NoiseDesc {
    fn default() -> Self {
        NoiseDesc {
            kind: default_noise_kind(),
            bound: 0.0,
        }
    }
}

impl NoiseDesc {
    pub fn kind(&self) -> Result<NoiseKind> {
        Ok(self.kind.parse::<NoiseKind>()?)
    }

    pub fn model(&self, seed: u64) -> Result<NoiseModel> {
        let model = match self.kind()? {
            NoiseKind::None => NoiseModel::none(),
            NoiseKind::UniformBounded => NoiseModel::uniform(self.bound, seed),
            NoiseKind::AdversarialSign => NoiseModel::adversarial(self.bound),
        };
        model.validate()?;
        Ok(model)
    }

    /// Bound of the noise actually injected.
    pub fn effective_bound(&self) -> Result<f64> {
        Ok(match self.kind()? {
            NoiseKind::None => 0.0,
            _ => self.bound,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverDesc {
    pub sparsity: Option<usize>,
    pub max_iterations: Option<usize>,
    pub query_budget: Option<u64>,
    pub step_size: Option<f64>,
    pub delta: Option<f64>,
    pub b1: Option<f64>,
    pub num_directions: Option<usize>,
    pub phi: Option<f64>,
    pub check_rows: Option<usize>,
    pub spsa_batch: Option<usize>,
    pub target_value: Option<f64>,
    #[serde(default)]
    pub warm_start: bool,
    #[serde(default)]
    pub backtracking: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    Constant,
    #[default]
    Gaussian,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartDesc {
    #[serde(default)]
    pub kind: StartKind,
    /// Entry value for `constant`.
    #[serde(default = "one")]
    pub value: f64,
    /// Standard deviation for `gaussian`.
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub low: f64,
    #[serde(default = "one")]
    pub high: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for StartDesc {
    fn default() -> Self {
        StartDesc {
            kind: StartKind::Gaussian,
            value: 1.0,
            scale: 1.0,
            low: 0.0,
            high: 1.0,
        }
    }
}

impl StartDesc {
    pub fn point(&self, d: usize, seed: u64) -> Result<DVector<f64>> {
        let mut r = rng::stream(seed);
        Ok(match self.kind {
            StartKind::Constant => DVector::from_element(d, self.value),
            StartKind::Gaussian => rng::gaussian_vector(&mut r, d) * self.scale,
            StartKind::Uniform => {
                if !(self.low < self.high) {
                    return Err(BenchError::Usage("uniform start needs low < high".into()));
                }
                let u = rng::uniform_vector(&mut r, d);
                u.map(|t| self.low + (self.high - self.low) * t)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    pub out_dir: Option<PathBuf>,
    pub methods: Vec<Method>,
    /// Relative accuracy for queries-to-threshold: `F_err ≤ threshold·F_err(x0)`.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Stop each run once the threshold is reached.
    #[serde(default)]
    pub stop_at_threshold: bool,
    pub problem: ProblemDesc,
    #[serde(default)]
    pub regularizer: RegularizerDesc,
    #[serde(default)]
    pub noise: NoiseDesc,
    #[serde(default)]
    pub solver: SolverDesc,
    #[serde(default)]
    pub start: StartDesc,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_repetitions() -> usize {
    1
}

fn default_threshold() -> f64 {
    1e-3
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.chars().count(), |i| before[i + 1..].chars().count()) + 1;
    (line, column)
}

impl ExperimentSpec {
    /// Reads and validates an experiment file. Relative asset paths resolve
    /// against the file's directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let mut spec = Self::parse(&text, path)?;
        if let ProblemDesc::Portfolio {
            assets_dir: Some(dir), ..
        } = &mut spec.problem
        {
            if dir.is_relative() {
                if let Some(parent) = path.parent() {
                    *dir = parent.join(&*dir);
                }
            }
        }
        spec.validate(path)?;
        Ok(spec)
    }

    /// Parses experiment text; `origin` is only used in error messages.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str::<ExperimentSpec>(text).map_err(|e| {
            let message = e.message().to_string();
            match e.span() {
                Some(span) => {
                    let (line, column) = line_column(text, span.start);
                    BenchError::Core(zoro::ZoroError::Parse {
                        path: origin.to_path_buf(),
                        line,
                        column,
                        message,
                    })
                }
                None => BenchError::config(origin, message),
            }
        })
    }

    pub fn validate(&self, origin: &Path) -> Result<()> {
        let fail = |m: String| Err(BenchError::config(origin, m));
        if self.repetitions == 0 {
            return fail("repetitions must be at least 1".into());
        }
        if self.methods.is_empty() {
            return fail("at least one method is required".into());
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return fail(format!("threshold must be positive, got {}", self.threshold));
        }
        if let Err(e) = self.noise.kind() {
            return fail(e.to_string());
        }
        if let ProblemDesc::Portfolio {
            assets_dir, dimension, ..
        } = &self.problem
        {
            match assets_dir {
                Some(dir) => {
                    for file in ["means.csv", "stddevs.csv", "correlations.csv"] {
                        if !dir.join(file).is_file() {
                            return fail(format!("missing asset file {}", dir.join(file).display()));
                        }
                    }
                }
                None if dimension.is_none() => return fail("portfolio needs `dimension` or `assets_dir`".into()),
                None => {}
            }
        }
        if self.problem.dimension() == 0 && !matches!(self.problem, ProblemDesc::Portfolio { .. }) {
            return fail("dimension must be at least 1".into());
        }
        Ok(())
    }

    pub fn sparsity(&self) -> usize {
        self.solver.sparsity.unwrap_or_else(|| self.problem.natural_sparsity())
    }

    /// Solver settings for one method; `seed` drives directions and SPSA.
    pub fn solver_config(&self, method: Method, seed: u64) -> SolverConfig {
        let s = &self.solver;
        let estimator = match method {
            Method::ZoroFixed => EstimatorKind::Fixed,
            Method::ZoroOpportunistic => EstimatorKind::Opportunistic,
            Method::Fdsa => EstimatorKind::Fdsa,
            Method::Spsa => EstimatorKind::Spsa {
                batch: s.spsa_batch.unwrap_or(1),
            },
        };
        let mut cfg = SolverConfig::new(self.sparsity()).with_estimator(estimator).with_seed(seed);
        cfg.max_iterations = s.max_iterations.unwrap_or(100);
        cfg.query_budget = s.query_budget;
        cfg.step_size = s.step_size;
        cfg.delta = s.delta;
        cfg.b1 = s.b1.unwrap_or(4.0);
        cfg.num_directions = s.num_directions;
        cfg.opportunistic = OppConfig {
            phi: s.phi.unwrap_or(OppConfig::default().phi),
            check_rows: s.check_rows.unwrap_or(0),
        };
        cfg.target_value = s.target_value;
        cfg.warm_start = s.warm_start;
        cfg.backtracking = s.backtracking;
        cfg
    }
}
