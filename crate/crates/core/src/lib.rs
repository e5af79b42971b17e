//! Zeroth-order regularized optimization.
//!
//! `zoro` minimizes `F(x) = f(x) + r(x)` when `f` can only be queried through a
//! noisy oracle `E_f(x) = f(x) + ξ` with `|ξ| ≤ σ`. Gradients are estimated from
//! finite differences along Rademacher directions and recovered as sparse
//! vectors with CoSaMP, then fed to a proximal gradient step.
//!
//! The crate is organised bottom-up:
//!
//! * [`problems`]: the oracle, query accounting, noise models and the benchmark
//!   objectives.
//! * [`sensing`]: Rademacher directions and normalized finite-difference
//!   measurements.
//! * [`sparse_recovery`]: CoSaMP and support-restricted least squares.
//! * [`estimators`]: fixed-sparsity and opportunistic gradient estimation plus
//!   the FDSA and SPSA baselines.
//! * [`regularizers`]: proximal operators.
//! * [`solver`]: the iteration driver and its trace.
//!
//! ```
//! use nalgebra::DVector;
//! use zoro::problems::{make_sparse_quadratic, NoiseModel};
//! use zoro::regularizers::Regularizer;
//! use zoro::solver::{zoro_run, SolverConfig};
//!
//! let problem = make_sparse_quadratic(50, 5, 1).unwrap();
//! let x0 = DVector::from_element(50, 0.1);
//! let cfg = SolverConfig::new(5).with_max_iterations(30);
//! let out = zoro_run(&problem, &NoiseModel::none(), &Regularizer::Zero, &x0, &cfg).unwrap();
//! assert!(out.trace.final_objective < 1e-6);
//! ```

pub mod error;
pub mod estimators;
pub mod problems;
pub mod regularizers;
pub mod rng;
pub mod sensing;
pub mod solver;
pub mod sparse_recovery;

pub use error::{Result, ZoroError};
