//! CoSaMP sparse recovery and support-restricted least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, ZoroError};

/// Settings for [`cosamp`].
#[derive(Debug, Clone, PartialEq)]
pub struct CosampConfig {
    pub sparsity: usize,
    pub max_iterations: usize,
    /// Stop once `(‖r_prev‖ − ‖r‖)/‖r_prev‖` falls below this value.
    pub halting_tol: f64,
    /// Optional warm start, length `d`.
    pub init: Option<DVector<f64>>,
}

impl CosampConfig {
    pub fn new(sparsity: usize) -> Self {
        CosampConfig {
            sparsity,
            max_iterations: 10,
            halting_tol: 1e-8,
            init: None,
        }
    }

    pub fn with_init(mut self, init: DVector<f64>) -> Self {
        self.init = Some(init);
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    pub values: DVector<f64>,
    /// Sorted ascending.
    pub support: Vec<usize>,
    pub residual_norm: f64,
    pub iterations_used: usize,
}

/// Indices of the `k` largest `|v_i|`, ties going to the lower index.
/// Returned in ascending order.
pub fn top_k_indices(v: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

fn columns(z: &DMatrix<f64>, support: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(z.nrows(), support.len(), |i, j| z[(i, support[j])])
}

/// Least squares coefficients for `z_s v ≈ y`.
///
/// Householder QR when `z_s` is tall and well conditioned, otherwise the
/// minimum-norm solution from an SVD.
fn dense_least_squares(z_s: DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let (m, k) = z_s.shape();
    if m >= k {
        let qr = z_s.clone().qr();
        let r = qr.r();
        let diag_max = r.diagonal().amax();
        let diag_min = r.diagonal().iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        if diag_max > 0.0 && diag_min > diag_max * 1e-10 {
            let qty = qr.q().transpose() * y;
            if let Some(v) = r.solve_upper_triangular(&qty) {
                return v;
            }
        }
    }
    let svd = z_s.svd(true, true);
    let eps = svd.singular_values.max() * (m.max(k) as f64) * f64::EPSILON;
    svd.solve(y, eps).unwrap_or_else(|_| DVector::zeros(k))
}

/// Minimizes `‖Z_S v_S − y‖₂` over coefficients on `support`; zero
/// elsewhere. Rank deficiency yields the minimum-norm solution.
pub fn restricted_least_squares(z: &DMatrix<f64>, y: &DVector<f64>, support: &[usize]) -> Result<DVector<f64>> {
    if support.is_empty() {
        return Err(ZoroError::InvalidArgument("restricted least squares needs a nonempty support".into()));
    }
    if y.len() != z.nrows() {
        return Err(ZoroError::DimensionMismatch {
            expected: z.nrows(),
            got: y.len(),
        });
    }
    let d = z.ncols();
    if let Some(&bad) = support.iter().find(|&&i| i >= d) {
        return Err(ZoroError::InvalidArgument(format!("support index {bad} out of range for d={d}")));
    }
    let coeffs = dense_least_squares(columns(z, support), y);
    let mut out = DVector::zeros(d);
    for (j, &i) in support.iter().enumerate() {
        out[i] = coeffs[j];
    }
    Ok(out)
}

/// Numerical rank of the columns of `z` indexed by `support`.
pub fn restricted_rank(z: &DMatrix<f64>, support: &[usize]) -> usize {
    if support.is_empty() || z.nrows() == 0 {
        return 0;
    }
    let sv = columns(z, support).singular_values();
    let tol = sv.max() * (z.nrows().max(support.len()) as f64) * f64::EPSILON;
    sv.iter().filter(|v| **v > tol).count()
}

fn residual_norm(z: &DMatrix<f64>, y: &DVector<f64>, v: &DVector<f64>) -> f64 {
    (z * v - y).norm()
}

fn support_of(v: &DVector<f64>) -> Vec<usize> {
    v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, _)| i).collect()
}

/// Approximates `argmin ‖Z g − y‖₂` subject to `‖g‖₀ ≤ s` by CoSaMP.
pub fn cosamp(z: &DMatrix<f64>, y: &DVector<f64>, cfg: &CosampConfig) -> Result<SparseSolution> {
    let (m, d) = z.shape();
    let s = cfg.sparsity;
    if m == 0 || y.len() != m {
        return Err(ZoroError::DimensionMismatch { expected: m, got: y.len() });
    }
    if s == 0 || s > d {
        return Err(ZoroError::InvalidArgument(format!("sparsity must lie in [1, {d}], got {s}")));
    }
    if cfg.max_iterations == 0 {
        return Err(ZoroError::InvalidArgument("CoSaMP needs at least one iteration".into()));
    }
    if !z.iter().all(|v| v.is_finite()) || !y.iter().all(|v| v.is_finite()) {
        return Err(ZoroError::InvalidArgument("CoSaMP inputs must be finite".into()));
    }
    if s > m {
        log::warn!("sparsity {s} exceeds measurement count {m}; recovery is not guaranteed");
    }

    let mut x = match &cfg.init {
        Some(init) if init.len() != d => {
            return Err(ZoroError::DimensionMismatch { expected: d, got: init.len() });
        }
        Some(init) => {
            // A warm start denser than s is pruned to its top s entries.
            let keep = top_k_indices(init.as_slice(), s);
            let mut v = DVector::zeros(d);
            for i in keep {
                v[i] = init[i];
            }
            v
        }
        None => DVector::zeros(d),
    };
    let mut res = residual_norm(z, y, &x);
    let y_norm = y.norm();
    let mut iterations_used = 0;
    if y_norm == 0.0 {
        return Ok(SparseSolution {
            values: DVector::zeros(d),
            support: Vec::new(),
            residual_norm: 0.0,
            iterations_used,
        });
    }

    for it in 1..=cfg.max_iterations {
        if res == 0.0 {
            break;
        }
        let r = y - z * &x;
        let proxy = z.transpose() * r;
        let mut merged = top_k_indices(proxy.as_slice(), (2 * s).min(d));
        merged.extend(support_of(&x));
        merged.sort_unstable();
        merged.dedup();

        let b = restricted_least_squares(z, y, &merged)?;
        // Refit on the pruned support rather than truncating b.
        let keep = top_k_indices(b.as_slice(), s);
        let candidate = restricted_least_squares(z, y, &keep)?;
        let cand_res = residual_norm(z, y, &candidate);
        if cand_res > res {
            break;
        }
        let decrease = (res - cand_res) / res;
        x = candidate;
        res = cand_res;
        iterations_used = it;
        if decrease < cfg.halting_tol {
            break;
        }
    }

    Ok(SparseSolution {
        support: support_of(&x),
        residual_norm: residual_norm(z, y, &x),
        values: x,
        iterations_used,
    })
}
