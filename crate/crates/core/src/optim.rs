//! Adam optimiser over the network's parameter slots.

use serde::{Deserialize, Serialize};

use crate::network::{Gradients, RevisionNet};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Number of updates applied so far.
    pub step: u64,
    pub first_moment: Vec<Vec<T>>,
    pub second_moment: Vec<Vec<T>>,
}

/// Serializable Adam hyper-parameters (moments travel separately).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(net: &RevisionNet<T>, beta1: f64, beta2: f64) -> Self {
        let zeros: Vec<Vec<T>> = net.slots().iter().map(|s| vec![T::zero(); s.len()]).collect();
        Self {
            beta1,
            beta2,
            eps: 1e-8,
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    pub fn state(&self) -> AdamState {
        AdamState {
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            step: self.step,
        }
    }

    /// Applies one bias-corrected Adam update with learning rate `lr`.
    pub fn update(&mut self, net: &mut RevisionNet<T>, grads: &Gradients<T>, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let b1 = T::of(self.beta1);
        let b2 = T::of(self.beta2);
        let one = T::one();
        let c1 = T::of(1.0 - self.beta1.powi(t));
        let c2 = T::of(1.0 - self.beta2.powi(t));
        let lr = T::of(lr);
        let eps = T::of(self.eps);
        for (((param, grad), m), v) in net
            .slots_mut()
            .into_iter()
            .zip(&grads.slots)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + (one - b1) * g;
                v[i] = b2 * v[i] + (one - b2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkConfig;

    #[test]
    fn first_step_moves_each_parameter_by_lr() {
        let cfg = NetworkConfig {
            base_features: 2,
            max_features: 2,
            depth: 2,
            input_size: 4,
            ..NetworkConfig::default()
        };
        let net0 = RevisionNet::<f64>::new(cfg, 0).unwrap();
        let mut net = net0.clone();
        let mut adam = Adam::new(&net, 0.9, 0.999);
        let mut grads = Gradients::zeros_like(&net);
        for s in &mut grads.slots {
            for (i, g) in s.iter_mut().enumerate() {
                *g = if i % 2 == 0 { 0.5 } else { -2.0 };
            }
        }
        adam.update(&mut net, &grads, 1e-3);
        // Bias-corrected first step is lr · sign(g) up to eps.
        for ((a, b), g) in net0.slots().iter().zip(net.slots()).zip(&grads.slots) {
            for i in 0..a.len() {
                let moved = b[i] - a[i];
                assert!((moved + 1e-3 * g[i].signum()).abs() < 1e-9);
            }
        }
        assert_eq!(adam.step, 1);
    }
}
