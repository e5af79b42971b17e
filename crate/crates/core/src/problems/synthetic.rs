//! Benchmark objectives with known gradients.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::ProblemSpec;
use crate::error::{Result, ZoroError};
use crate::rng::{self, Rng};

/// `f(x) = xᵀAx/2` with `A` diagonal and exactly `s` positive entries.
///
/// The active positions are drawn without replacement and the entries are
/// uniform on `(0, 1]`, both from the stream for `seed`.
pub fn make_sparse_quadratic(d: usize, s: usize, seed: u64) -> Result<ProblemSpec> {
    if s == 0 || s > d {
        return Err(ZoroError::InvalidSpec(format!(
            "sparse quadratic needs 1 ≤ s ≤ d, got s={s}, d={d}"
        )));
    }
    let mut rng = rng::stream(seed);
    let mut diag = DVector::zeros(d);
    let mut positions = index::sample(&mut rng, d, s).into_vec();
    positions.sort_unstable();
    for &i in &positions {
        diag[i] = 1.0 - rng.random::<f64>();
    }
    diagonal_quadratic("sparse_quadratic", diag)
}

/// `f(x) = xᵀAx/2` with `A_ii = exp(-ω i)`, `i = 1..d`.
pub fn make_compressible_quadratic(d: usize, omega: f64) -> Result<ProblemSpec> {
    if d == 0 {
        return Err(ZoroError::InvalidSpec("dimension must be at least 1".into()));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(ZoroError::InvalidSpec(format!("ω must be positive, got {omega}")));
    }
    let diag = DVector::from_fn(d, |i, _| (-omega * (i + 1) as f64).exp());
    diagonal_quadratic("compressible_quadratic", diag)
}

fn diagonal_quadratic(name: &str, diag: DVector<f64>) -> Result<ProblemSpec> {
    let d = diag.len();
    let lipschitz = diag.max();
    // Entrywise ℓ₁ norm of a diagonal Hessian is its trace.
    let h = diag.sum();
    let objective_diag = diag.clone();
    ProblemSpec::new(name, d, lipschitz, move |x: &DVector<f64>| {
        Ok(0.5 * x.iter().zip(objective_diag.iter()).map(|(xi, a)| a * xi * xi).sum::<f64>())
    })?
    .with_hessian_bound(h)
    .map(|p| {
        p.with_optimum(0.0)
            .with_true_gradient(move |x: &DVector<f64>| x.component_mul(&diag))
    })
}

/// Indices of the `k` largest-magnitude entries of `x`, ascending.
///
/// Ties are broken in favour of the lower index.
pub fn max_k_active_set(x: &DVector<f64>, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}

/// Sum of squares of the `k` largest-magnitude entries of `x`.
///
/// The gradient support moves with `x` and can be any `k`-subset.
pub fn make_max_k_squared_sum(d: usize, k: usize) -> Result<ProblemSpec> {
    if k == 0 || k > d {
        return Err(ZoroError::InvalidSpec(format!(
            "max-k-squared-sum needs 1 ≤ k ≤ d, got k={k}, d={d}"
        )));
    }
    Ok(ProblemSpec::new("max_k_squared_sum", d, 2.0, move |x: &DVector<f64>| {
        Ok(max_k_active_set(x, k).iter().map(|&i| x[i] * x[i]).sum())
    })?
    .with_hessian_bound(2.0 * k as f64)?
    .with_optimum(0.0)
    .with_true_gradient(move |x: &DVector<f64>| {
        let mut g = DVector::zeros(x.len());
        for i in max_k_active_set(x, k) {
            g[i] = 2.0 * x[i];
        }
        g
    }))
}

/// Orthonormal factor of the QR decomposition of a standard Gaussian matrix.
pub fn random_orthonormal(d: usize, rng: &mut Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// `f(x) = (x - x_true)ᵀ Q D Qᵀ (x - x_true)`.
///
/// `x_true` is binary with `⌈density·d⌉` ones, `D` is diagonal with uniform
/// `[0, 1)` entries and `Q` comes from [`random_orthonormal`].
pub fn make_rotated_sparse_quadratic(d: usize, density: f64, seed: u64) -> Result<ProblemSpec> {
    if d == 0 {
        return Err(ZoroError::InvalidSpec("dimension must be at least 1".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(ZoroError::InvalidSpec(format!("density must lie in (0, 1], got {density}")));
    }
    let mut rng = rng::stream(seed);
    let ones = ((density * d as f64).ceil() as usize).clamp(1, d);
    let mut x_true = DVector::zeros(d);
    for i in index::sample(&mut rng, d, ones).into_iter() {
        x_true[i] = 1.0;
    }
    let spectrum = DVector::from_fn(d, |_, _| rng.random::<f64>());
    let q = random_orthonormal(d, &mut rng);
    let m = &q * DMatrix::from_diagonal(&spectrum) * q.transpose();
    let lipschitz = 2.0 * spectrum.max().max(f64::MIN_POSITIVE);
    let h = 2.0 * m.iter().map(|v| v.abs()).sum::<f64>();

    let (m_f, xt_f) = (m.clone(), x_true.clone());
    Ok(ProblemSpec::new("rotated_sparse_quadratic", d, lipschitz, move |x: &DVector<f64>| {
        let r = x - &xt_f;
        Ok(r.dot(&(&m_f * &r)))
    })?
    .with_hessian_bound(h)?
    .with_optimum(0.0)
    .with_true_gradient(move |x: &DVector<f64>| 2.0 * (&m * (x - &x_true))))
}

/// One-dimensional Huber loss with quadratic core `|x| ≤ m`.
///
/// `sigma` is recorded as the problem's noise bound; the divergence demo pairs
/// it with adversarial noise of the same size.
pub fn make_huber_demo(m: f64, sigma: f64) -> Result<ProblemSpec> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(ZoroError::InvalidSpec(format!("Huber threshold must be positive, got {m}")));
    }
    let huber = move |t: f64| {
        if t.abs() <= m {
            0.5 * t * t
        } else {
            m * (t.abs() - 0.5 * m)
        }
    };
    Ok(ProblemSpec::new("huber", 1, 1.0, move |x: &DVector<f64>| Ok(huber(x[0])))?
        .with_hessian_bound(1.0)?
        .with_noise_bound(sigma)?
        .with_optimum(0.0)
        .with_true_gradient(move |x: &DVector<f64>| DVector::from_element(1, x[0].clamp(-m, m))))
}
