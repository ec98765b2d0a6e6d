//! Adam optimizer with bias correction.

use crate::tensor::{Tensor, TensorError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment estimates per parameter name, plus the step counter.
#[derive(Clone, Debug)]
pub struct AdamState {
    config: AdamConfig,
    step: u64,
    first: BTreeMap<String, Vec<f64>>,
    second: BTreeMap<String, Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> AdamState {
        AdamState {
            config,
            step: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update over all named parameters. Parameters without a
    /// gradient entry are treated as having zero gradient.
    pub fn step(
        &mut self,
        params: &mut [(String, &mut Tensor)],
        grads: &BTreeMap<String, Vec<f64>>,
    ) -> Result<(), TensorError> {
        self.step += 1;
        let t = self.step as i32;
        let c = self.config;
        let bias1 = 1.0 - c.beta1.powi(t);
        let bias2 = 1.0 - c.beta2.powi(t);

        for (name, tensor) in params.iter_mut() {
            let zero;
            let grad: &[f64] = match grads.get(name) {
                Some(g) => g,
                None => {
                    zero = vec![0.0; tensor.len()];
                    &zero
                }
            };
            if grad.len() != tensor.len() {
                return Err(TensorError::ShapeMismatch {
                    name: name.clone(),
                    expected: tensor.shape().to_vec(),
                    found: vec![grad.len()],
                });
            }
            let m = self
                .first
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; tensor.len()]);
            let v = self
                .second
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; tensor.len()]);
            let data = tensor.data_mut();
            for i in 0..data.len() {
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                data[i] -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_param(value: Vec<f64>) -> Tensor {
        Tensor::vector(value)
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut state = AdamState::new(AdamConfig::default());
        let mut p = single_param(vec![1.0, -2.0, 3.0]);
        let before = p.clone();
        let grads = BTreeMap::from([("p".to_string(), vec![0.0; 3])]);
        state
            .step(&mut [("p".to_string(), &mut p)], &grads)
            .unwrap();
        assert_eq!(p, before);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let mut state = AdamState::new(AdamConfig {
            learning_rate: 0.0,
            ..AdamConfig::default()
        });
        let mut p = single_param(vec![0.5]);
        let grads = BTreeMap::from([("p".to_string(), vec![7.0])]);
        state
            .step(&mut [("p".to_string(), &mut p)], &grads)
            .unwrap();
        assert_eq!(p.data(), &[0.5]);
    }

    #[test]
    fn constant_gradient_step_magnitude_approaches_lr() {
        let config = AdamConfig::default();
        let mut state = AdamState::new(config);
        let mut p = single_param(vec![0.0]);
        let grads = BTreeMap::from([("p".to_string(), vec![3.0])]);
        let mut prev = p.data()[0];
        let mut last_step = 0.0;
        for _ in 0..1000 {
            state
                .step(&mut [("p".to_string(), &mut p)], &grads)
                .unwrap();
            last_step = (p.data()[0] - prev).abs();
            prev = p.data()[0];
        }
        // With a constant gradient the bias-corrected update converges to
        // lr * g / (|g| + eps) ~= lr.
        assert!(
            (last_step - config.learning_rate).abs() < 1e-6,
            "step magnitude {last_step}"
        );
    }

    #[test]
    fn mismatched_gradient_length_is_an_error() {
        let mut state = AdamState::new(AdamConfig::default());
        let mut p = single_param(vec![1.0, 2.0]);
        let grads = BTreeMap::from([("p".to_string(), vec![1.0])]);
        let err = state
            .step(&mut [("p".to_string(), &mut p)], &grads)
            .unwrap_err();
        assert!(err.to_string().contains('p'));
    }
}
