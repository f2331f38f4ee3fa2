use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// RMSprop hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl Default for RmsProp {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            decay: 0.9,
            epsilon: 1e-8,
        }
    }
}

/// Squared-gradient accumulators, one per parameter tensor, zero-initialized.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsPropState {
    pub accumulators: Vec<Vec<f64>>,
}

impl RmsPropState {
    pub fn new<'a>(shapes: impl IntoIterator<Item = &'a [f64]>) -> Self {
        Self {
            accumulators: shapes.into_iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }
}

impl RmsProp {
    /// `v <- rho v + (1 - rho) g^2`, `p <- p - lr g / (sqrt(v) + eps)`.
    pub fn step(&self, param: &mut [f64], grad: &[f64], v: &mut [f64]) -> Result<()> {
        if param.len() != grad.len() || param.len() != v.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", param.len()),
                got: format!("grad {} / state {}", grad.len(), v.len()),
            });
        }
        let (rho, lr, eps) = (self.decay, self.learning_rate, self.epsilon);
        for ((p, &g), v) in param.iter_mut().zip(grad).zip(v.iter_mut()) {
            *v = rho * *v + (1.0 - rho) * g * g;
            if lr != 0.0 {
                *p -= lr * g / (v.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_only_decays() {
        let opt = RmsProp::default();
        let mut p = [0.7];
        let mut v = [0.5];
        opt.step(&mut p, &[0.0], &mut v).unwrap();
        assert_eq!(p, [0.7]);
        assert!((v[0] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn single_step_by_hand() {
        let opt = RmsProp::default();
        let mut p = [0.0];
        let mut v = [0.0];
        opt.step(&mut p, &[1.0], &mut v).unwrap();
        assert!((v[0] - 0.1).abs() < 1e-15);
        let expected = -0.001 / (0.1f64.sqrt() + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] + 0.003_162_3).abs() < 1e-7);
    }

    #[test]
    fn minimizes_quadratic() {
        // at the default rate each step moves ~1e-3, so 500 steps cannot
        // cover the distance from p = 1
        let opt = RmsProp {
            learning_rate: 0.01,
            ..Default::default()
        };
        let mut p = [1.0];
        let mut v = [0.0];
        for _ in 0..500 {
            let g = [2.0 * p[0]];
            opt.step(&mut p, &g, &mut v).unwrap();
        }
        assert!(p[0].abs() < 0.01, "p = {}", p[0]);
    }

    #[test]
    fn zero_learning_rate_freezes() {
        let opt = RmsProp {
            learning_rate: 0.0,
            ..Default::default()
        };
        let mut p = [1.5, -2.0];
        let mut v = [0.0; 2];
        opt.step(&mut p, &[3.0, 4.0], &mut v).unwrap();
        assert_eq!(p, [1.5, -2.0]);
        assert!(opt.step(&mut p, &[1.0], &mut v).is_err());
    }
}
