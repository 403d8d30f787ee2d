use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adam hyper-parameters and a piecewise-constant learning-rate schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSchedule {
    pub beta1: f64,
    pub beta2: f64,
    pub total_iterations: u64,
    /// `(first iteration, rate)` plateaus.
    pub lr_steps: Vec<(u64, f64)>,
    pub batch_size: usize,
}

impl Default for OptimizerSchedule {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            total_iterations: 100_000,
            lr_steps: vec![(0, 1e-4), (50_000, 1e-5), (75_000, 1e-6)],
            batch_size: 1,
        }
    }
}

impl OptimizerSchedule {
    /// Same shape as the default schedule — tenfold drops at 50% and 75% of
    /// the budget — over `total_iterations` starting from `initial_lr`.
    pub fn scaled(total_iterations: u64, initial_lr: f64) -> Self {
        Self {
            total_iterations,
            lr_steps: vec![
                (0, initial_lr),
                (total_iterations / 2, initial_lr / 10.0),
                (total_iterations * 3 / 4, initial_lr / 100.0),
            ],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("schedule: {m}")));
        if self.lr_steps.first().map(|s| s.0) != Some(0) {
            return bad("the first learning-rate step must start at iteration 0");
        }
        if self.lr_steps.windows(2).any(|w| w[0].0 >= w[1].0) {
            return bad("learning-rate steps must be strictly increasing in iteration");
        }
        if self.lr_steps.iter().any(|s| !(s.1 > 0.0 && s.1.is_finite())) {
            return bad("learning rates must be positive");
        }
        if self.total_iterations == 0 {
            return bad("total_iterations must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if self.batch_size != 1 {
            return bad("only batch_size = 1 is supported");
        }
        Ok(())
    }

    pub fn lr_at(&self, iteration: u64) -> Result<f64> {
        if iteration >= self.total_iterations {
            return Err(Error::OutOfRange {
                iteration,
                total: self.total_iterations,
            });
        }
        Ok(self
            .lr_steps
            .iter()
            .rev()
            .find(|(start, _)| *start <= iteration)
            .map(|s| s.1)
            .expect("validated schedule starts at 0"))
    }
}
