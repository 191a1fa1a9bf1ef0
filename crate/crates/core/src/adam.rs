//! Adam optimizer with bias correction.

use crate::error::{Error, Result};
use crate::tensor::{Parameter, Tensor};

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
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

/// First/second moment buffers, one pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    step_count: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &[Parameter]) -> Self {
        let first = params.iter().map(|p| Tensor::zeros(&p.value.shape)).collect();
        let second = params.iter().map(|p| Tensor::zeros(&p.value.shape)).collect();
        Adam {
            config,
            first,
            second,
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update from the gradients currently stored in `params`.
    pub fn step(&mut self, params: &mut [Parameter]) -> Result<()> {
        if params.len() != self.first.len() {
            return Err(Error::shape(format!(
                "optimizer tracks {} parameters, got {}",
                self.first.len(),
                params.len()
            )));
        }
        self.step_count += 1;
        let t = self.step_count;
        let c = &self.config;
        let bc1 = 1.0 - c.beta1.powi(t as i32);
        let bc2 = 1.0 - c.beta2.powi(t as i32);
        for (i, p) in params.iter_mut().enumerate() {
            if p.value.shape != self.first[i].shape {
                return Err(Error::shape(format!(
                    "parameter {} changed shape under the optimizer",
                    p.name
                )));
            }
            let m = &mut self.first[i].values;
            let v = &mut self.second[i].values;
            for j in 0..p.value.values.len() {
                let g = p.grad.values[j];
                m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
                v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p.value.values[j] -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
            }
        }
        Ok(())
    }
}
