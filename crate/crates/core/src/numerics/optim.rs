use serde::{Deserialize, Serialize};

use super::ParameterStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            ..Self::sgd(learning_rate)
        }
    }

    /// Checks the settings a training run needs. A zero learning rate is
    /// rejected here even though [`Optimizer`] itself accepts it.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        self.validate_moments()
    }

    fn validate_moments(&self) -> Result<()> {
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {beta}")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// SGD or Adam over a [`ParameterStore`], updating parameters in store order.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    steps: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        if !(config.learning_rate >= 0.0 && config.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be non-negative, got {}",
                config.learning_rate
            )));
        }
        config.validate_moments()?;
        Ok(Self {
            config,
            steps: 0,
            first: Vec::new(),
            second: Vec::new(),
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update from the gradients held in `store`, then clears them.
    pub fn step(&mut self, store: &mut ParameterStore) -> Result<()> {
        if let Some((name, _)) = store.iter().find(|(_, t)| t.grad().is_none()) {
            return Err(Error::Contract(format!("parameter `{name}` has no gradient")));
        }
        self.steps += 1;
        let lr = self.config.learning_rate;
        match self.config.kind {
            OptimizerKind::Sgd => {
                for idx in 0..store.len() {
                    let (_, t) = store.by_index_mut(idx);
                    let g = t.grad().expect("checked above").to_vec();
                    for (p, g) in t.data_mut().iter_mut().zip(g) {
                        *p -= lr * g;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.first.len() != store.len() {
                    self.first = store.iter().map(|(_, t)| vec![0.0; t.numel()]).collect();
                    self.second = self.first.clone();
                }
                let OptimizerConfig {
                    beta1, beta2, epsilon, ..
                } = self.config;
                let t = self.steps as i32;
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                for idx in 0..store.len() {
                    let (_, param) = store.by_index_mut(idx);
                    let g = param.grad().expect("checked above").to_vec();
                    let m = &mut self.first[idx];
                    let v = &mut self.second[idx];
                    for (i, p) in param.data_mut().iter_mut().enumerate() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        let m_hat = m[i] / bc1;
                        let v_hat = v[i] / bc2;
                        *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
        store.clear_grads();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn one_param(value: f64, grad: f64) -> ParameterStore {
        let mut store = ParameterStore::new();
        store.insert("theta", Tensor::scalar(value)).unwrap();
        store.get_mut("theta").unwrap().set_grad(vec![grad]);
        store
    }

    #[test]
    fn sgd_step() {
        let mut store = one_param(1.0, 2.0);
        Optimizer::new(OptimizerConfig::sgd(0.1))
            .unwrap()
            .step(&mut store)
            .unwrap();
        let t = store.get("theta").unwrap();
        assert!((t.item() - 0.8).abs() < 1e-15);
        assert!(t.grad().is_none());
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        for kind in [OptimizerConfig::sgd(0.0), OptimizerConfig::adam(0.0)] {
            let mut store = one_param(0.25, -3.0);
            Optimizer::new(kind).unwrap().step(&mut store).unwrap();
            assert_eq!(store.get("theta").unwrap().item(), 0.25);
        }
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut store = one_param(0.0, 1.0);
        Optimizer::new(OptimizerConfig::adam(0.001))
            .unwrap()
            .step(&mut store)
            .unwrap();
        assert!((store.get("theta").unwrap().item() + 0.001).abs() < 1e-10);
    }

    #[test]
    fn missing_gradient_names_the_parameter() {
        let mut store = ParameterStore::new();
        store.insert("lonely", Tensor::scalar(1.0)).unwrap();
        let err = Optimizer::new(OptimizerConfig::sgd(0.1))
            .unwrap()
            .step(&mut store)
            .unwrap_err();
        assert!(err.to_string().contains("lonely"));
    }

    #[test]
    fn run_config_rejects_zero_rate() {
        assert!(OptimizerConfig::adam(0.0).validate().is_err());
        assert!(OptimizerConfig::adam(5e-4).validate().is_ok());
    }
}
