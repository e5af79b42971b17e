//! Gradient compressibility diagnostics.
//!
//! For each sample point the gradient magnitudes are sorted and normalized,
//! `|g|(i)/‖g‖₂`, and two fits are made on the nonzero ranks:
//!
//! * a power law `|g|(i)/‖g‖₂ ≈ c·i^(−1/p)`, reported as the exponent `p`;
//! * a geometric law `|g|(i+1)/|g|(i) ≈ ρ`, reported as the ratio `ρ`.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use zoro::estimators::fdsa_gradient;
use zoro::problems::{Oracle, ProblemSpec};
use zoro::rng;

use crate::error::Result;
use crate::output;

/// Finite-difference radius used when the problem has no analytic gradient.
pub const PROBE_DELTA: f64 = 1e-6;

/// Ratios at or below this are treated as zero by the fits.
pub const ZERO_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PointFit {
    pub point: usize,
    /// Sorted `|g|(i)/‖g‖₂`; empty for a zero gradient.
    pub ratios: Vec<f64>,
    pub nonzero_ranks: usize,
    /// Power-law exponent `p`; NaN with fewer than two nonzero ranks.
    pub exponent: f64,
    /// Geometric decay ratio; NaN with fewer than two nonzero ranks.
    pub geometric_ratio: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct CompressibilityReport {
    pub fits: Vec<PointFit>,
    pub decay_path: Option<PathBuf>,
    pub fit_path: Option<PathBuf>,
}

/// `n` points drawn uniformly from the unit sphere.
pub fn random_points(d: usize, n: usize, seed: u64) -> Vec<DVector<f64>> {
    (0..n)
        .map(|i| rng::random_unit_vector(&mut rng::stream(rng::derive_seed(seed, i as u64)), d))
        .collect()
}

/// Gradient at `x`: analytic when available, else noiseless forward
/// differences.
pub fn probe_gradient(problem: &ProblemSpec, x: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(g) = problem.true_gradient(x) {
        return Ok(g);
    }
    let delta = PROBE_DELTA * x.amax().max(1.0);
    Ok(fdsa_gradient(&mut Oracle::noiseless(problem), x, delta)?.g_hat)
}

/// Slope of the least-squares line through `(xs, ys)`.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Sorted normalized magnitudes and both fits for one gradient.
pub fn fit_gradient(point: usize, g: &DVector<f64>) -> PointFit {
    let norm = g.norm();
    if norm == 0.0 || !norm.is_finite() {
        return PointFit {
            point,
            ratios: Vec::new(),
            nonzero_ranks: 0,
            exponent: f64::NAN,
            geometric_ratio: f64::NAN,
            note: Some(if norm == 0.0 { "zero gradient, skipped" } else { "non-finite gradient, skipped" }.into()),
        };
    }
    let mut ratios: Vec<f64> = g.iter().map(|v| v.abs() / norm).collect();
    ratios.sort_by(|a, b| b.total_cmp(a));
    let kept: Vec<f64> = ratios.iter().copied().take_while(|r| *r > ZERO_RATIO).collect();
    let nonzero_ranks = kept.len();
    let (exponent, geometric_ratio, note) = if nonzero_ranks < 2 {
        (f64::NAN, f64::NAN, Some("fewer than two nonzero ranks".to_string()))
    } else {
        let ranks: Vec<f64> = (1..=nonzero_ranks).map(|i| i as f64).collect();
        let logs: Vec<f64> = kept.iter().map(|r| r.ln()).collect();
        let power = slope(&ranks.iter().map(|r| r.ln()).collect::<Vec<_>>(), &logs);
        let exponent = if power < 0.0 { -1.0 / power } else { f64::INFINITY };
        (exponent, slope(&ranks, &logs).exp(), None)
    };
    PointFit {
        point,
        ratios,
        nonzero_ranks,
        exponent,
        geometric_ratio,
        note,
    }
}

/// Fits every point and, with `out_dir`, writes `decay.csv`
/// (`point,rank,ratio`) and `compressibility_fit.csv`.
pub fn compressibility_report(
    problem: &ProblemSpec,
    points: &[DVector<f64>],
    out_dir: Option<&Path>,
) -> Result<CompressibilityReport> {
    let fits = points
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let fit = fit_gradient(i, &probe_gradient(problem, x)?);
            if let Some(note) = &fit.note {
                log::warn!("point {i}: {note}");
            }
            Ok(fit)
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut decay_path, mut fit_path) = (None, None);
    if let Some(dir) = out_dir {
        output::create_dir(dir)?;
        let path = dir.join("decay.csv");
        let rows = fits.iter().flat_map(|f| {
            f.ratios
                .iter()
                .enumerate()
                .map(move |(r, v)| vec![f.point.to_string(), (r + 1).to_string(), v.to_string()])
        });
        output::write_csv(&path, &["point", "rank", "ratio"], rows)?;
        decay_path = Some(path);

        let path = dir.join("compressibility_fit.csv");
        let rows = fits.iter().map(|f| {
            vec![
                f.point.to_string(),
                f.nonzero_ranks.to_string(),
                f.exponent.to_string(),
                f.geometric_ratio.to_string(),
                f.note.clone().unwrap_or_default(),
            ]
        });
        output::write_csv(
            &path,
            &["point", "nonzero_ranks", "exponent_p", "geometric_ratio", "note"],
            rows,
        )?;
        fit_path = Some(path);
    }
    Ok(CompressibilityReport {
        fits,
        decay_path,
        fit_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_power_law_recovers_its_exponent() {
        let g = DVector::from_fn(50, |i, _| ((i + 1) as f64).powf(-2.0));
        let fit = fit_gradient(0, &g);
        assert_relative_eq!(fit.exponent, 0.5, epsilon = 1e-10);
        assert_eq!(fit.nonzero_ranks, 50);
    }

    #[test]
    fn exact_geometric_law_recovers_its_ratio() {
        let g = DVector::from_fn(30, |i, _| 0.7f64.powi(i as i32) * if i % 2 == 0 { 1.0 } else { -1.0 });
        let fit = fit_gradient(0, &g);
        assert_relative_eq!(fit.geometric_ratio, 0.7, epsilon = 1e-12);
        assert_relative_eq!(fit.ratios.iter().map(|r| r * r).sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_gradients_carry_notes() {
        assert!(fit_gradient(0, &DVector::zeros(4)).note.unwrap().contains("zero gradient"));
        let one = fit_gradient(1, &DVector::from_vec(vec![0.0, 3.0, 0.0]));
        assert_eq!(one.nonzero_ranks, 1);
        assert!(one.exponent.is_nan());
        assert_eq!(one.ratios, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn points_are_unit_and_seeded() {
        let a = random_points(7, 3, 5);
        assert_eq!(a, random_points(7, 3, 5));
        for p in &a {
            assert_relative_eq!(p.norm(), 1.0, epsilon = 1e-12);
        }
    }
}
