//! Gradient estimators: fixed-sparsity CoSaMP, opportunistic CoSaMP, and the
//! FDSA and SPSA baselines.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, ZoroError};
use crate::problems::Oracle;
use crate::rng::{self, Rng};
use crate::sensing::{self, DirectionSet};
use crate::sparse_recovery::{cosamp, restricted_least_squares, restricted_rank, CosampConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorMethod {
    ZoroFixed,
    ZoroOpportunistic,
    Fdsa,
    Spsa,
}

impl EstimatorMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorMethod::ZoroFixed => "zoro_fixed",
            EstimatorMethod::ZoroOpportunistic => "zoro_opportunistic",
            EstimatorMethod::Fdsa => "fdsa",
            EstimatorMethod::Spsa => "spsa",
        }
    }
}

/// Where an opportunistic estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OppStage {
    /// Least squares on the previous support passed the residual test.
    Restricted,
    /// CoSaMP on the full direction set passed.
    Cosamp,
    /// Passed after this many growth rounds.
    Grown(usize),
    /// The direction set reached `d` rows and full least squares was used.
    FullLeastSquares,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub g_hat: DVector<f64>,
    /// Ascending support indices: the nonzero entries of `g_hat`, or the
    /// fitted columns for a restricted opportunistic fit.
    pub support: Vec<usize>,
    pub queries_used: u64,
    /// `‖Zĝ − y‖₂ / ‖y‖₂`, zero when `y = 0`. Zero for FDSA and SPSA.
    pub relative_fit_residual: f64,
    pub method: EstimatorMethod,
    pub stage: Option<OppStage>,
    /// Set when the estimate came from dense least squares instead of a
    /// sparse solve.
    pub fallback: bool,
    /// Sparsity level in force when the estimate was produced.
    pub sparsity: usize,
    /// Oracle value at `x` queried during the round, if any.
    pub base_value: Option<f64>,
}

fn nonzero_support(v: &DVector<f64>) -> Vec<usize> {
    v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, _)| i).collect()
}

fn relative_residual(z: &DMatrix<f64>, y: &DVector<f64>, g: &DVector<f64>) -> f64 {
    let y_norm = y.norm();
    if y_norm == 0.0 {
        0.0
    } else {
        (z * g - y).norm() / y_norm
    }
}

fn check_point(oracle: &Oracle<'_>, x: &DVector<f64>) -> Result<()> {
    if x.len() != oracle.dimension() {
        return Err(ZoroError::DimensionMismatch {
            expected: oracle.dimension(),
            got: x.len(),
        });
    }
    Ok(())
}

fn all_indices(d: usize) -> Vec<usize> {
    (0..d).collect()
}

/// Fixed-sparsity estimate: one sampling round of `m + 1` queries followed by
/// CoSaMP at sparsity `s`.
///
/// When the direction set has at least `d` rows the system is solved by
/// dense least squares instead and the estimate is flagged as a fallback.
pub fn estimate_gradient(
    oracle: &mut Oracle<'_>,
    x: &DVector<f64>,
    s: usize,
    delta: f64,
    dirs: &DirectionSet,
) -> Result<GradientEstimate> {
    estimate_gradient_with(oracle, x, delta, dirs, &CosampConfig::new(s))
}

/// As [`estimate_gradient`] with explicit CoSaMP settings, for example a warm
/// start.
pub fn estimate_gradient_with(
    oracle: &mut Oracle<'_>,
    x: &DVector<f64>,
    delta: f64,
    dirs: &DirectionSet,
    cfg: &CosampConfig,
) -> Result<GradientEstimate> {
    check_point(oracle, x)?;
    let d = x.len();
    let start = oracle.queries();
    let raw = sensing::sample_raw(oracle, x, delta, dirs)?;
    let ms = sensing::assemble(&raw.y_raw, dirs, delta, oracle.queries() - start)?;
    let (g_hat, fallback) = if dirs.m() >= d {
        (restricted_least_squares(&ms.z, &ms.y, &all_indices(d))?, true)
    } else {
        (cosamp(&ms.z, &ms.y, cfg)?.values, false)
    };
    Ok(GradientEstimate {
        support: nonzero_support(&g_hat),
        relative_fit_residual: relative_residual(&ms.z, &ms.y, &g_hat),
        g_hat,
        queries_used: oracle.queries() - start,
        method: EstimatorMethod::ZoroFixed,
        stage: None,
        fallback,
        sparsity: if fallback { d } else { cfg.sparsity },
        base_value: Some(raw.base_value),
    })
}

/// Settings for [`opportunistic_estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OppConfig {
    /// Residual tolerance `φ ∈ (0, 1]`.
    pub phi: f64,
    /// Extra directions sampled in the first stage beyond `|Ŝ|`. With zero
    /// the first-stage system is square and its residual test only fails when
    /// the restricted sensing block is singular.
    pub check_rows: usize,
}

impl Default for OppConfig {
    fn default() -> Self {
        OppConfig { phi: 0.3, check_rows: 0 }
    }
}

impl OppConfig {
    pub fn with_phi(phi: f64) -> Self {
        OppConfig { phi, ..Self::default() }
    }
}

/// State carried between opportunistic estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct OppState {
    pub dirs: DirectionSet,
    pub prev_support: Vec<usize>,
    pub s_current: usize,
    pub m_current: usize,
    growth_seed: u64,
    growth_blocks: u64,
}

impl OppState {
    /// `growth_seed` drives the directions appended when the set grows.
    pub fn new(dirs: DirectionSet, prev_support: Vec<usize>, growth_seed: u64) -> Result<Self> {
        if prev_support.is_empty() {
            return Err(ZoroError::InvalidArgument("opportunistic state needs a nonempty support".into()));
        }
        if let Some(&bad) = prev_support.iter().find(|&&i| i >= dirs.d()) {
            return Err(ZoroError::InvalidArgument(format!("support index {bad} out of range")));
        }
        let m_current = dirs.m();
        Ok(OppState {
            s_current: prev_support.len(),
            m_current,
            dirs,
            prev_support,
            growth_seed,
            growth_blocks: 0,
        })
    }

    fn grow(&mut self, rows: usize) -> Result<()> {
        let seed = rng::derive_seed(self.growth_seed, self.growth_blocks);
        self.growth_blocks += 1;
        let more = sensing::rademacher_directions(rows, self.dirs.d(), seed)?;
        self.dirs.append(&more)?;
        self.m_current = self.dirs.m();
        Ok(())
    }
}

/// Growth increment `max(1, ⌈ln(d/s)⌉)`.
pub fn growth_increment(d: usize, s: usize) -> usize {
    let inc = (d as f64 / s.max(1) as f64).ln().ceil();
    if inc.is_finite() && inc >= 1.0 {
        inc as usize
    } else {
        1
    }
}

/// Opportunistic estimate reusing the previous support.
///
/// Stage 1 samples `|Ŝ|` directions and fits least squares on `Ŝ`; if the
/// restricted block has full column rank and the relative residual is at most
/// `φ` it returns at a cost of `|Ŝ| + 1` queries. Otherwise the remaining directions are sampled and CoSaMP runs on
/// the stacked, renormalized system, adding directions and raising the
/// sparsity until the residual test passes or the set holds `d` directions,
/// in which case dense least squares is used. The base value at `x` is
/// queried once per call, so a call never exceeds `d + 1` queries unless the
/// incoming direction set is already larger than `d`.
pub fn opportunistic_estimate(
    oracle: &mut Oracle<'_>,
    x: &DVector<f64>,
    mut state: OppState,
    delta: f64,
    cfg: &OppConfig,
) -> Result<(GradientEstimate, OppState)> {
    check_point(oracle, x)?;
    if !(cfg.phi > 0.0 && cfg.phi <= 1.0) {
        return Err(ZoroError::InvalidArgument(format!("phi must lie in (0, 1], got {}", cfg.phi)));
    }
    if state.dirs.d() != x.len() {
        return Err(ZoroError::DimensionMismatch {
            expected: x.len(),
            got: state.dirs.d(),
        });
    }
    let d = x.len();
    let start = oracle.queries();
    let mut s = state.prev_support.len();
    let stage1_rows = (s + cfg.check_rows).min(d);
    if state.dirs.m() < stage1_rows {
        state.grow(stage1_rows - state.dirs.m())?;
    }

    let base = oracle.evaluate_reference(x)?;
    let mut y_raw = sensing::sample_rows(oracle, x, delta, &state.dirs, 0..stage1_rows, base)?;
    let z1 = state.dirs.slice(0..stage1_rows).matrix().clone();
    let g1 = restricted_least_squares(&z1, &y_raw, &state.prev_support)?;
    let ratio1 = relative_residual(&z1, &y_raw, &g1);
    // A singular restricted block fits any data, so its residual says nothing.
    let identifiable = restricted_rank(&z1, &state.prev_support) == s;

    let finish = |g_hat: DVector<f64>, ratio: f64, stage: OppStage, sparsity: usize, oracle: &Oracle<'_>, mut state: OppState| {
        // A restricted fit keeps every fitted column, including coefficients
        // that round to exactly zero once a coordinate has converged.
        let support = if stage == OppStage::Restricted {
            state.prev_support.clone()
        } else {
            nonzero_support(&g_hat)
        };
        if !support.is_empty() {
            state.s_current = support.len();
            state.prev_support = support.clone();
        }
        state.m_current = state.dirs.m();
        let estimate = GradientEstimate {
            g_hat,
            support,
            queries_used: oracle.queries() - start,
            relative_fit_residual: ratio,
            method: EstimatorMethod::ZoroOpportunistic,
            stage: Some(stage),
            fallback: stage == OppStage::FullLeastSquares,
            sparsity,
            base_value: Some(base),
        };
        (estimate, state)
    };

    if identifiable && ratio1 <= cfg.phi {
        return Ok(finish(g1, ratio1, OppStage::Restricted, s, oracle, state));
    }

    let m = state.dirs.m();
    let rest = sensing::sample_rows(oracle, x, delta, &state.dirs, stage1_rows..m, base)?;
    y_raw = y_raw.resize_vertically(m, 0.0);
    y_raw.rows_mut(stage1_rows, m - stage1_rows).copy_from(&rest);

    let mut rounds = 0;
    loop {
        let m = state.dirs.m();
        let ms = sensing::assemble(&y_raw, &state.dirs, delta, 0)?;
        if m >= d {
            let g = restricted_least_squares(&ms.z, &ms.y, &all_indices(d))?;
            let ratio = relative_residual(&ms.z, &ms.y, &g);
            return Ok(finish(g, ratio, OppStage::FullLeastSquares, d, oracle, state));
        }
        let g = cosamp(&ms.z, &ms.y, &CosampConfig::new(s.min(d)))?.values;
        let ratio = relative_residual(&ms.z, &ms.y, &g);
        if ratio <= cfg.phi {
            let stage = if rounds == 0 { OppStage::Cosamp } else { OppStage::Grown(rounds) };
            return Ok(finish(g, ratio, stage, s, oracle, state));
        }
        let new_m = (m + growth_increment(d, s)).min(d);
        state.grow(new_m - m)?;
        let more = sensing::sample_rows(oracle, x, delta, &state.dirs, m..new_m, base)?;
        y_raw = y_raw.resize_vertically(new_m, 0.0);
        y_raw.rows_mut(m, new_m - m).copy_from(&more);
        s = (s + 1).min(d);
        rounds += 1;
    }
}

/// Forward differences along every coordinate: `d + 1` queries.
pub fn fdsa_gradient(oracle: &mut Oracle<'_>, x: &DVector<f64>, delta: f64) -> Result<GradientEstimate> {
    check_point(oracle, x)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(ZoroError::InvalidArgument(format!("sampling radius must be positive, got {delta}")));
    }
    let d = x.len();
    let start = oracle.queries();
    let base = oracle.evaluate_reference(x)?;
    let mut g_hat = DVector::zeros(d);
    let mut probe = x.clone();
    for i in 0..d {
        probe[i] = x[i] + delta;
        g_hat[i] = (oracle.evaluate(&probe)? - base) / delta;
        probe[i] = x[i];
    }
    Ok(GradientEstimate {
        support: nonzero_support(&g_hat),
        g_hat,
        queries_used: oracle.queries() - start,
        relative_fit_residual: 0.0,
        method: EstimatorMethod::Fdsa,
        stage: None,
        fallback: false,
        sparsity: d,
        base_value: Some(base),
    })
}

/// Central-difference SPSA averaged over `batch` Rademacher directions drawn
/// from `rng`: `2·batch` queries.
pub fn spsa_gradient(
    oracle: &mut Oracle<'_>,
    x: &DVector<f64>,
    delta: f64,
    batch: usize,
    rng: &mut Rng,
) -> Result<GradientEstimate> {
    check_point(oracle, x)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(ZoroError::InvalidArgument(format!("sampling radius must be positive, got {delta}")));
    }
    if batch == 0 {
        return Err(ZoroError::InvalidArgument("SPSA batch must be at least 1".into()));
    }
    let d = x.len();
    let start = oracle.queries();
    let mut g_hat = DVector::zeros(d);
    for _ in 0..batch {
        let z = rng::rademacher_vector(rng, d);
        g_hat += spsa_term(oracle, x, delta, &z)?;
    }
    g_hat /= batch as f64;
    Ok(GradientEstimate {
        support: nonzero_support(&g_hat),
        g_hat,
        queries_used: oracle.queries() - start,
        relative_fit_residual: 0.0,
        method: EstimatorMethod::Spsa,
        stage: None,
        fallback: false,
        sparsity: d,
        base_value: None,
    })
}

/// `[(E_f(x + δz) − E_f(x − δz)) / (2δ)] z`.
pub fn spsa_term(oracle: &mut Oracle<'_>, x: &DVector<f64>, delta: f64, z: &DVector<f64>) -> Result<DVector<f64>> {
    let plus = oracle.evaluate(&(x + z * delta))?;
    let minus = oracle.evaluate(&(x - z * delta))?;
    Ok(z * ((plus - minus) / (2.0 * delta)))
}
