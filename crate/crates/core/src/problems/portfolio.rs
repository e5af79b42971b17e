//! Penalized minimum-risk portfolio objective.
//!
//! Asset data is ingested from three CSV files:
//!
//! * `means.csv`: one expected return per line,
//! * `stddevs.csv`: one standard deviation per line,
//! * `correlations.csv`: `d` lines of `d` comma-separated values, symmetric
//!   with unit diagonal.
//!
//! Blank lines are ignored. Parse errors carry the 1-based line and column.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::ProblemSpec;
use crate::error::{Result, ZoroError};
use crate::rng;

const SYMMETRY_TOL: f64 = 1e-8;

/// Per-asset return statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetTable {
    pub means: DVector<f64>,
    pub stddevs: DVector<f64>,
    pub correlations: DMatrix<f64>,
}

impl AssetTable {
    pub fn new(means: DVector<f64>, stddevs: DVector<f64>, correlations: DMatrix<f64>) -> Result<Self> {
        let d = means.len();
        if d == 0 {
            return Err(ZoroError::InvalidSpec("asset table is empty".into()));
        }
        if stddevs.len() != d || correlations.nrows() != d || correlations.ncols() != d {
            return Err(ZoroError::InvalidSpec(format!(
                "inconsistent asset table: {} means, {} stddevs, {}x{} correlations",
                d,
                stddevs.len(),
                correlations.nrows(),
                correlations.ncols()
            )));
        }
        if let Some(s) = stddevs.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(ZoroError::InvalidSpec(format!("standard deviation {s} is not ≥ 0")));
        }
        for i in 0..d {
            if (correlations[(i, i)] - 1.0).abs() > SYMMETRY_TOL {
                return Err(ZoroError::InvalidSpec(format!(
                    "correlation diagonal entry {} is {}, expected 1",
                    i + 1,
                    correlations[(i, i)]
                )));
            }
            for j in 0..i {
                if (correlations[(i, j)] - correlations[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(ZoroError::InvalidSpec(format!(
                        "correlation matrix is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self {
            means,
            stddevs,
            correlations,
        })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Reads `means.csv`, `stddevs.csv` and `correlations.csv` from `dir`.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Self::from_files(
            dir.join("means.csv"),
            dir.join("stddevs.csv"),
            dir.join("correlations.csv"),
        )
    }

    pub fn from_files(
        means: impl AsRef<Path>,
        stddevs: impl AsRef<Path>,
        correlations: impl AsRef<Path>,
    ) -> Result<Self> {
        let means = read_column(means.as_ref())?;
        let stddevs = read_column(stddevs.as_ref())?;
        let corr = read_matrix(correlations.as_ref())?;
        Self::new(means, stddevs, corr)
    }

    /// Writes the table in the ingestion format.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| ZoroError::io(dir, e))?;
        let column = |v: &DVector<f64>| v.iter().map(|x| format!("{x}\n")).collect::<String>();
        let matrix = self
            .correlations
            .row_iter()
            .map(|row| {
                let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                cells.join(",") + "\n"
            })
            .collect::<String>();
        for (name, body) in [
            ("means.csv", column(&self.means)),
            ("stddevs.csv", column(&self.stddevs)),
            ("correlations.csv", matrix),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| ZoroError::io(&path, e))?;
        }
        Ok(())
    }

    /// Random asset universe from a three-factor return model.
    ///
    /// Returns are uniform on `[0.002, 0.012]`, volatilities on `[0.02, 0.12]`.
    pub fn synthetic(d: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(ZoroError::InvalidSpec("asset table is empty".into()));
        }
        let mut rng = rng::stream(seed);
        let factors = 3;
        let loadings = DMatrix::from_fn(d, factors, |_, _| 0.5 * rng.sample::<f64, _>(StandardNormal));
        let idio = DVector::from_fn(d, |_, _| 0.2 + 0.8 * rng.random::<f64>());
        let mut cov = &loadings * loadings.transpose();
        for i in 0..d {
            cov[(i, i)] += idio[i];
        }
        let scale = DVector::from_fn(d, |i, _| cov[(i, i)].sqrt());
        let mut corr = DMatrix::from_fn(d, d, |i, j| cov[(i, j)] / (scale[i] * scale[j]));
        corr.fill_diagonal(1.0);
        let corr = (&corr + corr.transpose()) * 0.5;
        let means = DVector::from_fn(d, |_, _| 0.002 + 0.01 * rng.random::<f64>());
        let stddevs = DVector::from_fn(d, |_, _| 0.02 + 0.1 * rng.random::<f64>());
        Self::new(means, stddevs, corr)
    }

    /// `C_ij = s_i s_j ρ_ij`, with negative eigenvalues clipped to zero.
    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.len();
        let cov = DMatrix::from_fn(d, d, |i, j| {
            self.stddevs[i] * self.stddevs[j] * self.correlations[(i, j)]
        });
        let eig = SymmetricEigen::new(cov.clone());
        let min = eig.eigenvalues.min();
        if min >= 0.0 {
            return cov;
        }
        log::warn!("covariance has negative eigenvalue {min:e}; clipping to zero");
        let clipped = eig.eigenvalues.map(|v| v.max(0.0));
        let c = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        (&c + c.transpose()) * 0.5
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| ZoroError::io(path, e))
}

fn parse_cell(path: &Path, line: usize, column: usize, text: &str) -> Result<f64> {
    let t = text.trim();
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ZoroError::Parse {
            path: PathBuf::from(path),
            line,
            column,
            message: format!("expected a finite number, found `{t}`"),
        })
}

fn read_column(path: &Path) -> Result<DVector<f64>> {
    let text = read_text(path)?;
    let mut values = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        values.push(parse_cell(path, n + 1, 1, line)?);
    }
    Ok(DVector::from_vec(values))
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = read_text(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(c, cell)| parse_cell(path, n + 1, c + 1, cell))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(ZoroError::Parse {
                    path: path.into(),
                    line: n + 1,
                    column: row.len().min(first.len()) + 1,
                    message: format!("expected {} values, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let d = rows.len();
    if d > 0 && rows[0].len() != d {
        return Err(ZoroError::Parse {
            path: path.into(),
            line: 1,
            column: 1,
            message: format!("correlation matrix must be square, found {d} rows of {}", rows[0].len()),
        });
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

/// Penalized portfolio risk
/// `xᵀCx / (2(Σx)²) + λ·min(mᵀx/Σx − r, 0)²`.
///
/// The objective is scale invariant in `x`; evaluating at `Σx = 0` is a domain
/// error. `L` and `H` are local estimates on the simplex `Σx = 1`.
pub fn make_portfolio_oracle(assets: &AssetTable, lambda: f64, r: f64) -> Result<ProblemSpec> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ZoroError::InvalidSpec(format!("penalty weight must be positive, got {lambda}")));
    }
    let d = assets.len();
    let cov = assets.covariance();
    let means = assets.means.clone();

    let spread = means.map(|m| m - r);
    let lambda_max = SymmetricEigen::new(cov.clone()).eigenvalues.max().max(0.0);
    let lipschitz = (lambda_max + 2.0 * lambda * spread.norm_squared()).max(f64::MIN_POSITIVE);
    let h = cov.iter().map(|v| v.abs()).sum::<f64>() + 2.0 * lambda * spread.abs().sum().powi(2);

    let (c_f, m_f) = (cov.clone(), means.clone());
    let objective = move |x: &DVector<f64>| {
        let total = x.sum();
        if total == 0.0 {
            return Err(ZoroError::Domain("portfolio weights sum to zero".into()));
        }
        let risk = x.dot(&(&c_f * x)) / (2.0 * total * total);
        let shortfall = (m_f.dot(x) / total - r).min(0.0);
        Ok(risk + lambda * shortfall * shortfall)
    };
    let gradient = move |x: &DVector<f64>| {
        let total = x.sum();
        let cx = &cov * x;
        let quad = x.dot(&cx);
        let mut g = cx / (total * total) - DVector::from_element(d, quad / total.powi(3));
        let ret = means.dot(x) / total;
        let shortfall = (ret - r).min(0.0);
        if shortfall < 0.0 {
            let dret = (&means - DVector::from_element(d, ret)) / total;
            g += dret * (2.0 * lambda * shortfall);
        }
        g
    };
    Ok(ProblemSpec::new("portfolio", d, lipschitz, objective)?
        .with_hessian_bound(h)?
        .with_true_gradient(gradient))
}
