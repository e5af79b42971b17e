//! Proximal operators for the composite step `x⁺ = prox_{αr}(x − αĝ)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Result, ZoroError};

/// A user-supplied regularizer.
pub trait ProxOperator: Send + Sync {
    /// `argmin_w ½‖w − v‖² + α r(w)`.
    fn prox(&self, v: &DVector<f64>, alpha: f64) -> DVector<f64>;

    /// `r(x)`, finite on the domain of `r`.
    fn value(&self, x: &DVector<f64>) -> f64;

    fn name(&self) -> &str {
        "custom"
    }
}

#[derive(Clone)]
pub enum Regularizer {
    Zero,
    NonNeg,
    Box { lower: DVector<f64>, upper: DVector<f64> },
    L1 { lambda: f64 },
    Custom(Arc<dyn ProxOperator>),
}

impl fmt::Debug for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regularizer::Zero => f.write_str("Zero"),
            Regularizer::NonNeg => f.write_str("NonNeg"),
            Regularizer::Box { lower, upper } => f
                .debug_struct("Box")
                .field("lower", &lower.as_slice())
                .field("upper", &upper.as_slice())
                .finish(),
            Regularizer::L1 { lambda } => f.debug_struct("L1").field("lambda", lambda).finish(),
            Regularizer::Custom(op) => write!(f, "Custom({})", op.name()),
        }
    }
}

impl Regularizer {
    /// Box constraint `lower ≤ x ≤ upper`, validated.
    pub fn boxed(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        let reg = Regularizer::Box { lower, upper };
        reg.validate()?;
        Ok(reg)
    }

    pub fn l1(lambda: f64) -> Result<Self> {
        let reg = Regularizer::L1 { lambda };
        reg.validate()?;
        Ok(reg)
    }

    pub fn custom(op: impl ProxOperator + 'static) -> Self {
        Regularizer::Custom(Arc::new(op))
    }

    pub fn name(&self) -> &str {
        match self {
            Regularizer::Zero => "zero",
            Regularizer::NonNeg => "nonneg",
            Regularizer::Box { .. } => "box",
            Regularizer::L1 { .. } => "l1",
            Regularizer::Custom(op) => op.name(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Regularizer::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(ZoroError::InvalidSpec(format!(
                        "box bounds have lengths {} and {}",
                        lower.len(),
                        upper.len()
                    )));
                }
                if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
                    return Err(ZoroError::InvalidSpec(format!(
                        "box lower bound {} exceeds upper bound {} at index {i}",
                        lower[i], upper[i]
                    )));
                }
                Ok(())
            }
            Regularizer::L1 { lambda } if !(*lambda >= 0.0 && lambda.is_finite()) => {
                Err(ZoroError::InvalidSpec(format!("l1 weight must be nonnegative, got {lambda}")))
            }
            _ => Ok(()),
        }
    }

    fn check_dimension(&self, d: usize) -> Result<()> {
        if let Regularizer::Box { lower, .. } = self {
            if lower.len() != d {
                return Err(ZoroError::DimensionMismatch {
                    expected: lower.len(),
                    got: d,
                });
            }
        }
        Ok(())
    }

    /// `prox_{αr}(v)`.
    pub fn prox(&self, v: &DVector<f64>, alpha: f64) -> Result<DVector<f64>> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ZoroError::InvalidArgument(format!("prox step must be positive, got {alpha}")));
        }
        self.validate()?;
        self.check_dimension(v.len())?;
        let out = match self {
            Regularizer::Zero => v.clone(),
            Regularizer::NonNeg => v.map(|x| x.max(0.0)),
            Regularizer::Box { lower, upper } => DVector::from_fn(v.len(), |i, _| v[i].clamp(lower[i], upper[i])),
            Regularizer::L1 { lambda } => {
                let t = alpha * lambda;
                v.map(|x| x.signum() * (x.abs() - t).max(0.0))
            }
            Regularizer::Custom(op) => {
                let w = op.prox(v, alpha);
                if w.len() != v.len() {
                    return Err(ZoroError::DimensionMismatch {
                        expected: v.len(),
                        got: w.len(),
                    });
                }
                w
            }
        };
        Ok(out)
    }

    /// `r(x)`, with `+∞` outside the feasible set of an indicator.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            Regularizer::Zero => 0.0,
            Regularizer::NonNeg => {
                if x.iter().all(|v| *v >= 0.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Regularizer::Box { lower, upper } => {
                let inside = x.len() == lower.len() && (0..x.len()).all(|i| lower[i] <= x[i] && x[i] <= upper[i]);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Regularizer::L1 { lambda } => lambda * x.lp_norm(1),
            Regularizer::Custom(op) => op.value(x),
        }
    }

    /// Contribution of `r` to a reported objective: indicators count as zero
    /// so that an infeasible starting point still has a finite record.
    pub fn penalty(&self, x: &DVector<f64>) -> f64 {
        match self {
            Regularizer::NonNeg | Regularizer::Box { .. } => 0.0,
            _ => self.value(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn examples() {
        assert_eq!(Regularizer::NonNeg.prox(&v(&[-1.0, 2.0]), 1.0).unwrap(), v(&[0.0, 2.0]));
        let l1 = Regularizer::l1(1.0).unwrap();
        assert_eq!(l1.prox(&v(&[1.0, -0.2]), 0.5).unwrap(), v(&[0.5, 0.0]));
        let x = v(&[3.0, -4.0]);
        assert_eq!(Regularizer::Zero.prox(&x, 7.0).unwrap(), x);
        let b = Regularizer::boxed(v(&[0.0, -1.0]), v(&[1.0, 1.0])).unwrap();
        assert_eq!(b.prox(&x, 1.0).unwrap(), v(&[1.0, -1.0]));
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(
            Regularizer::boxed(v(&[1.0]), v(&[0.0])),
            Err(ZoroError::InvalidSpec(_))
        ));
        assert!(Regularizer::l1(-1.0).is_err());
        assert!(Regularizer::NonNeg.prox(&v(&[1.0]), 0.0).is_err());
        let b = Regularizer::boxed(v(&[0.0]), v(&[1.0])).unwrap();
        assert!(b.prox(&v(&[0.5, 0.5]), 1.0).is_err());
    }

    #[test]
    fn values_and_penalties() {
        assert_eq!(Regularizer::NonNeg.value(&v(&[-1.0])), f64::INFINITY);
        assert_eq!(Regularizer::NonNeg.penalty(&v(&[-1.0])), 0.0);
        assert_eq!(Regularizer::l1(2.0).unwrap().value(&v(&[1.0, -0.5])), 3.0);
    }

    struct Scale;

    impl ProxOperator for Scale {
        fn prox(&self, v: &DVector<f64>, alpha: f64) -> DVector<f64> {
            // r(w) = ½‖w‖²
            v / (1.0 + alpha)
        }

        fn value(&self, x: &DVector<f64>) -> f64 {
            0.5 * x.norm_squared()
        }

        fn name(&self) -> &str {
            "ridge"
        }
    }

    #[test]
    fn custom_operator_is_called() {
        let r = Regularizer::custom(Scale);
        assert_eq!(r.prox(&v(&[2.0]), 1.0).unwrap(), v(&[1.0]));
        assert_eq!(r.name(), "ridge");
        assert_eq!(r.penalty(&v(&[2.0])), 2.0);
    }
}
