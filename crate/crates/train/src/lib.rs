//! Training of stochastic spiking networks as generative models.
//!
//! The loss is the unbiased signature-kernel MMD between generated and
//! observed spike trains; its gradient flows through the generated spike
//! times only, assembled as (kernel gradient with respect to spike times)
//! times (pathwise spike-time sensitivities). Optimization uses RMSProp with
//! a piecewise-constant learning rate.

pub mod error;
pub mod experiments;
pub mod loss;
pub mod optimizer;

pub use error::{Error, Result};
pub use experiments::{
    experiment_input_current, experiment_weights, first_three_spike_mae, InputCurrentConfig,
    StepRecord, TrainRun, WeightsConfig,
};
pub use loss::{loss_and_gradient, LossConfig, LossReport, Trainable};
pub use optimizer::{LrSchedule, RmsProp};
