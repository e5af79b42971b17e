//! Experiment harness for `zoro`.
//!
//! Experiments are described in TOML files ([`config`]), executed in
//! parallel with deterministic seeding ([`experiment`]) and written as CSV
//! ([`output`]). [`report`], [`sweep`] and [`huber`] implement the diagnostic
//! verbs of the `zoro-bench` binary.

pub mod config;
pub mod error;
pub mod experiment;
pub mod huber;
pub mod output;
pub mod report;
pub mod sweep;

pub use config::{ExperimentSpec, Method};
pub use error::{BenchError, Result};

/// Command-line settings that take precedence over an experiment file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub budget: Option<u64>,
    /// Noise bound; turns on uniform noise when the file has none.
    pub sigma: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, spec: &mut ExperimentSpec) -> Result<()> {
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(budget) = self.budget {
            spec.solver.query_budget = Some(budget);
        }
        if let Some(sigma) = self.sigma {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(BenchError::Usage(format!("--sigma must be ≥ 0, got {sigma}")));
            }
            spec.noise.bound = sigma;
            if sigma > 0.0 && spec.noise.kind()? == zoro::problems::NoiseKind::None {
                spec.noise.kind = "uniform_bounded".into();
            }
        }
        Ok(())
    }
}
