//! Adam optimizer over the model's flattened parameter vector.

use super::ModelParams;
use crate::error::{Error, Result};

/// Adam hyperparameters. Defaults: step size 1e-3, decay rates 0.9/0.999,
/// denominator floor 1e-8, bias-corrected moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Argument(format!(
                "step size must be positive, got {}",
                self.lr
            )));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::Argument(format!(
                    "{name} must lie in [0, 1), got {beta}"
                )));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Argument(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Optimizer state: first and second moment estimates per parameter, aligned
/// with the model's canonical flattening order.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    steps: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(config: AdamConfig, param_count: usize) -> Result<Self> {
        config.validate()?;
        Ok(Adam {
            config,
            steps: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        })
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    /// Apply one update. A gradient containing any non-finite entry refuses
    /// the whole step and leaves parameters and moments untouched.
    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) -> Result<()> {
        let flat = grads.to_flat();
        if flat.len() != self.m.len() {
            return Err(Error::Argument(format!(
                "gradient has {} entries but the optimizer tracks {}",
                flat.len(),
                self.m.len()
            )));
        }
        if let Some(pos) = flat.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite gradient at parameter {pos}; step refused"
            )));
        }
        self.steps += 1;
        let t = self.steps as i32;
        let c = &self.config;
        let m_corr = 1.0 - c.beta1.powi(t);
        let v_corr = 1.0 - c.beta2.powi(t);
        let mut i = 0;
        params.visit_mut(&mut |p| {
            let g = flat[i];
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
            let m_hat = self.m[i] / m_corr;
            let v_hat = self.v[i] / v_corr;
            *p -= c.lr * m_hat / (v_hat.sqrt() + c.epsilon);
            i += 1;
        });
        debug_assert_eq!(i, flat.len());
        Ok(())
    }
}
