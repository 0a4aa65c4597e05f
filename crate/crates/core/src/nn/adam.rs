use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::sqrt;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam optimizer state for one weight vector.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, n_weights: usize) -> Self {
        Adam {
            config,
            m: vec![0.0; n_weights],
            v: vec![0.0; n_weights],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Applies one bias-corrected update to the weights whose mask entry is
    /// true. Non-finite gradients are rejected before anything is modified.
    pub fn step(&mut self, weights: &mut [f64], grads: &[f64], mask: &[bool]) -> Result<()> {
        if weights.len() != self.m.len() || grads.len() != self.m.len() || mask.len() != self.m.len() {
            return Err(Error::Dimension(alloc::format!(
                "optimizer sized for {} weights got weights {}, gradient {}, mask {}",
                self.m.len(),
                weights.len(),
                grads.len(),
                mask.len()
            )));
        }
        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index });
        }
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - libm::pow(c.beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(c.beta2, self.t as f64);
        for i in 0..weights.len() {
            if !mask[i] {
                continue;
            }
            let g = grads[i];
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            weights[i] -= c.learning_rate * m_hat / (sqrt(v_hat) + c.epsilon);
        }
        Ok(())
    }
}
