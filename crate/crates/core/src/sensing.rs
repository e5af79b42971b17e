//! Rademacher sensing directions and finite-difference measurements.
//!
//! A round of measurements at `x` queries the oracle once at `x` and once at
//! each `x + δ z_i`. The forward differences
//! `y_i = (E_f(x + δ z_i) − E_f(x)) / δ` approximate `z_iᵀ∇f(x)`; after
//! scaling both sides by `1/√m` they form the compressed-sensing system
//! `y ≈ Z g` with rows `z_iᵀ/√m`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Result, ZoroError};
use crate::problems::Oracle;
use crate::rng;

/// An `m × d` matrix of ±1 entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    directions: DMatrix<f64>,
    seed: u64,
}

impl DirectionSet {
    pub fn m(&self) -> usize {
        self.directions.nrows()
    }

    pub fn d(&self) -> usize {
        self.directions.ncols()
    }

    /// Seed of the first block of rows.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.directions
    }

    pub fn direction(&self, i: usize) -> DVector<f64> {
        self.directions.row(i).transpose()
    }

    /// Stacks the rows of `more` below the current rows.
    pub fn append(&mut self, more: &DirectionSet) -> Result<()> {
        if more.d() != self.d() {
            return Err(ZoroError::DimensionMismatch {
                expected: self.d(),
                got: more.d(),
            });
        }
        let (m, extra) = (self.m(), more.m());
        let mut grown = std::mem::replace(&mut self.directions, DMatrix::zeros(0, 0))
            .resize_vertically(m + extra, 0.0);
        grown.rows_mut(m, extra).copy_from(&more.directions);
        self.directions = grown;
        Ok(())
    }

    /// Rows `rows` as a new direction set.
    pub fn slice(&self, rows: Range<usize>) -> DirectionSet {
        DirectionSet {
            directions: self.directions.rows(rows.start, rows.len()).into_owned(),
            seed: self.seed,
        }
    }
}

/// Draws `m` i.i.d. Rademacher directions in dimension `d`.
///
/// Rows are filled in order, 64 signs per generator word, so a given
/// `(m, d, seed)` always reproduces the same matrix.
pub fn rademacher_directions(m: usize, d: usize, seed: u64) -> Result<DirectionSet> {
    if m == 0 || d == 0 {
        return Err(ZoroError::InvalidArgument(format!(
            "direction set needs m ≥ 1 and d ≥ 1, got m={m}, d={d}"
        )));
    }
    let mut rng = rng::stream(seed);
    let mut directions = DMatrix::zeros(m, d);
    let mut row = vec![0.0; d];
    for i in 0..m {
        rng::fill_rademacher(&mut rng, &mut row);
        directions.set_row(i, &RowDVector::from_row_slice(&row));
    }
    Ok(DirectionSet { directions, seed })
}

/// Unnormalized forward differences from one sampling round.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSamples {
    pub y_raw: DVector<f64>,
    /// `E_f(x)`, shared by every difference in the round.
    pub base_value: f64,
}

fn check_radius(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(ZoroError::InvalidArgument(format!("sampling radius must be positive, got {delta}")));
    }
    Ok(())
}

/// Queries `E_f(x)` once and `E_f(x + δ z_i)` for every direction: `m + 1`
/// oracle calls.
pub fn sample_raw(oracle: &mut Oracle<'_>, x: &DVector<f64>, delta: f64, dirs: &DirectionSet) -> Result<RawSamples> {
    check_radius(delta)?;
    if dirs.d() != x.len() {
        return Err(ZoroError::DimensionMismatch {
            expected: x.len(),
            got: dirs.d(),
        });
    }
    let base_value = oracle.evaluate_reference(x)?;
    let y_raw = sample_rows(oracle, x, delta, dirs, 0..dirs.m(), base_value)?;
    Ok(RawSamples { y_raw, base_value })
}

/// Forward differences along `rows` against an already queried `base_value`.
///
/// Makes exactly `rows.len()` oracle calls.
pub fn sample_rows(
    oracle: &mut Oracle<'_>,
    x: &DVector<f64>,
    delta: f64,
    dirs: &DirectionSet,
    rows: Range<usize>,
    base_value: f64,
) -> Result<DVector<f64>> {
    check_radius(delta)?;
    let mut y = DVector::zeros(rows.len());
    for (k, i) in rows.enumerate() {
        let probe = x + dirs.directions.row(i).transpose() * delta;
        y[k] = (oracle.evaluate(&probe)? - base_value) / delta;
    }
    Ok(y)
}

/// Normalized measurement system for sparse recovery.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    /// `y_raw / √m`.
    pub y: DVector<f64>,
    /// Rows `z_iᵀ / √m`.
    pub z: DMatrix<f64>,
    pub delta: f64,
    pub queries_used: u64,
}

/// Applies the `1/√m` scaling to a round of samples.
pub fn assemble(y_raw: &DVector<f64>, dirs: &DirectionSet, delta: f64, queries_used: u64) -> Result<MeasurementSet> {
    if y_raw.len() != dirs.m() {
        return Err(ZoroError::DimensionMismatch {
            expected: dirs.m(),
            got: y_raw.len(),
        });
    }
    let scale = 1.0 / (dirs.m() as f64).sqrt();
    Ok(MeasurementSet {
        y: y_raw * scale,
        z: dirs.matrix() * scale,
        delta,
        queries_used,
    })
}
