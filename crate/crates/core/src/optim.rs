//! First-order optimizers over per-layer parameter groups.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::network::{Grads, Network};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd { momentum: f64 },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    t: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, group_sizes: &[usize]) -> Self {
        Self {
            config,
            t: 0,
            first: group_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: match config {
                OptimizerConfig::Adam { .. } => group_sizes.iter().map(|&n| vec![0.0; n]).collect(),
                OptimizerConfig::Sgd { .. } => Vec::new(),
            },
        }
    }

    pub fn for_network(config: OptimizerConfig, network: &Network) -> Self {
        let sizes: Vec<usize> = network.zero_grads().iter().map(Vec::len).collect();
        Self::new(config, &sizes)
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Advances the step counter; call once before updating the groups.
    pub fn begin_step(&mut self) {
        self.t += 1;
    }

    pub fn update(&mut self, group: usize, lr: f64, params: &mut [f64], grads: &[f64]) {
        match self.config {
            OptimizerConfig::Adam { beta1, beta2, eps } => {
                let t = self.t.max(1) as i32;
                let c1 = 1.0 - libm::pow(beta1, t as f64);
                let c2 = 1.0 - libm::pow(beta2, t as f64);
                let (m, v) = (&mut self.first[group], &mut self.second[group]);
                for i in 0..params.len() {
                    let g = grads[i];
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    params[i] -= lr * m_hat / (libm::sqrt(v_hat) + eps);
                }
            }
            OptimizerConfig::Sgd { momentum } => {
                let vel = &mut self.first[group];
                for i in 0..params.len() {
                    vel[i] = momentum * vel[i] + grads[i];
                    params[i] -= lr * vel[i];
                }
            }
        }
    }

    /// One update of every layer of `network`.
    pub fn step_network(&mut self, network: &mut Network, grads: &Grads, lr: f64) {
        self.begin_step();
        for (i, layer) in network.layers_mut().iter_mut().enumerate() {
            if let Some(bank) = layer.bank_mut() {
                self.update(i, lr, bank.params_mut(), &grads[i]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_converges_on_quadratic_bowl() {
        let center = [3.0, -1.5, 0.25];
        let scale = [1.0, 10.0, 0.1];
        let mut x = [0.0; 3];
        let mut opt = Optimizer::new(OptimizerConfig::default(), &[3]);
        for step in 0..5000 {
            let grads: Vec<f64> = (0..3).map(|i| 2.0 * scale[i] * (x[i] - center[i])).collect();
            // decaying step so the iterate settles inside the tolerance
            let lr = 0.05 * libm::pow(0.997, step as f64);
            opt.begin_step();
            opt.update(0, lr, &mut x, &grads);
        }
        for i in 0..3 {
            assert!((x[i] - center[i]).abs() < 1e-6, "{:?}", x);
        }
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut x = [1.0, 2.0];
        let mut opt = Optimizer::new(OptimizerConfig::default(), &[2]);
        opt.begin_step();
        opt.update(0, 0.0, &mut x, &[5.0, -3.0]);
        assert_eq!(x, [1.0, 2.0]);
    }

    #[test]
    fn sgd_momentum() {
        let mut x = [0.0];
        let mut opt = Optimizer::new(OptimizerConfig::Sgd { momentum: 0.5 }, &[1]);
        opt.begin_step();
        opt.update(0, 1.0, &mut x, &[1.0]);
        opt.begin_step();
        opt.update(0, 1.0, &mut x, &[1.0]);
        assert_eq!(x, [-2.5]);
    }
}
