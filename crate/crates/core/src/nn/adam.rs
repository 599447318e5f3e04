use crate::linalg::Matrix;

use super::{NnError, ParameterSet, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Elementwise clip bound applied to every gradient entry.
    pub clip: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip: 5.0,
            weight_decay: 0.0,
        }
    }
}

/// Adam moments for every entry of one [`ParameterSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first: Vec<Matrix>,
    pub second: Vec<Matrix>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ParameterSet, config: AdamConfig) -> Self {
        let zeros = || -> Vec<Matrix> {
            params
                .iter()
                .map(|(_, p)| Matrix::zeros(p.value.rows(), p.value.cols()))
                .collect()
        };
        Self {
            config,
            first: zeros(),
            second: zeros(),
            step: 0,
        }
    }

    pub fn reset_moments(&mut self) {
        for m in self.first.iter_mut().chain(self.second.iter_mut()) {
            m.fill(0.0);
        }
    }

    /// One bias-corrected update. Per entry: `g ← clip(grad + decay·value)`,
    /// then the usual moment updates. Frozen tensors and frozen rows are
    /// skipped. Nothing is modified if any trainable gradient is non-finite.
    pub fn step(&mut self, params: &mut ParameterSet) -> Result<()> {
        for (_, p) in params.iter() {
            if p.trainable && p.grad.as_slice().iter().any(|g| !g.is_finite()) {
                return Err(NnError::NonFiniteGradient(p.name.clone()));
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            clip,
            weight_decay,
        } = self.config;
        let t = self.step as i32;
        let correct1 = 1.0 - beta1.powi(t);
        let correct2 = 1.0 - beta2.powi(t);

        for (i, p) in params.iter_mut().enumerate() {
            if !p.trainable {
                continue;
            }
            let cols = p.value.cols();
            let m = self.first[i].as_mut_slice();
            let v = self.second[i].as_mut_slice();
            let grads = p.grad.as_slice();
            let frozen = &p.frozen_rows;
            for (j, w) in p.value.as_mut_slice().iter_mut().enumerate() {
                if !frozen.is_empty() && frozen[j / cols] {
                    continue;
                }
                let g = (grads[j] + weight_decay * *w).clamp(-clip, clip);
                m[j] = beta1 * m[j] + (1.0 - beta1) * g;
                v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
                let m_hat = m[j] / correct1;
                let v_hat = v[j] / correct2;
                *w -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
