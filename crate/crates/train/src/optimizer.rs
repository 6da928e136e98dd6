//! RMSProp with momentum and a piecewise-constant learning rate.

use ndarray::Array1;

use crate::error::{Error, Result};

/// Piecewise-constant schedule: `base` until `drop_step`, `dropped` after.
#[derive(Debug, Clone, Copy)]
pub struct LrSchedule {
    pub base: f64,
    pub drop_step: Option<usize>,
    pub dropped: f64,
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        Self { base: lr, drop_step: None, dropped: lr }
    }

    pub fn with_drop(base: f64, drop_step: usize, dropped: f64) -> Self {
        Self { base, drop_step: Some(drop_step), dropped }
    }

    pub fn at(&self, step: usize) -> f64 {
        match self.drop_step {
            Some(drop) if step >= drop => self.dropped,
            _ => self.base,
        }
    }
}

/// v <- rho v + (1 - rho) g^2;  buf <- m buf + lr g / sqrt(v + eps);
/// theta <- theta - buf.
#[derive(Debug, Clone)]
pub struct RmsProp {
    pub schedule: LrSchedule,
    pub decay: f64,
    pub momentum: f64,
    pub epsilon: f64,
    second_moment: Array1<f64>,
    buffer: Array1<f64>,
}

impl RmsProp {
    pub fn new(n_params: usize, schedule: LrSchedule, decay: f64, momentum: f64) -> Self {
        Self {
            schedule,
            decay,
            momentum,
            epsilon: 1e-8,
            second_moment: Array1::zeros(n_params),
            buffer: Array1::zeros(n_params),
        }
    }

    pub fn step(
        &mut self,
        step_index: usize,
        params: &mut Array1<f64>,
        grad: &Array1<f64>,
    ) -> Result<()> {
        if params.len() != grad.len() || params.len() != self.second_moment.len() {
            return Err(Error::InvalidArgument(format!(
                "optimizer saw {} parameters and {} gradients for state of {}",
                params.len(),
                grad.len(),
                self.second_moment.len()
            )));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { step: step_index });
        }
        let lr = self.schedule.at(step_index);
        for i in 0..params.len() {
            self.second_moment[i] =
                self.decay * self.second_moment[i] + (1.0 - self.decay) * grad[i] * grad[i];
            self.buffer[i] = self.momentum * self.buffer[i]
                + lr * grad[i] / (self.second_moment[i] + self.epsilon).sqrt();
            params[i] -= self.buffer[i];
        }
        Ok(())
    }

    pub fn second_moment(&self) -> &Array1<f64> {
        &self.second_moment
    }
}
