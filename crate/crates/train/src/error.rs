use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver failure: {0}")]
    Solver(#[from] eventsde::Error),

    #[error("kernel failure: {0}")]
    Kernel(#[from] sigkernel::Error),

    #[error("event budget of {n_max} exhausted while simulating sample seed {seed}; the model is spiking too fast for the configured horizon")]
    EventBudget { seed: u64, n_max: usize },

    #[error("non-finite gradient at step {step}")]
    NonFiniteGradient { step: usize },
}
