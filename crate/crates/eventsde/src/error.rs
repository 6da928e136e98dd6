use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time {t} outside driver span [{t0}, {t1}]")]
    OutOfSpan { t: f64, t0: f64, t1: f64 },

    #[error("non-finite state at t = {t}: {context}")]
    NonFinite { t: f64, context: String },

    #[error("no sign change of event function over [{t0}, {t1}] (e({t0}) = {e_lo}, e({t1}) = {e_hi})")]
    NoBracket { t0: f64, t1: f64, e_lo: f64, e_hi: f64 },

    #[error("event localization did not converge within {iterations} iterations (|e| = {residual})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("transition at t = {t} landed in the kernel of event function {label} (e = {value}); model violates the no-immediate-retrigger assumption")]
    KernelViolation { t: f64, label: usize, value: f64 },

    #[error("more than one event type crosses inside one step at t = {t} even after halving twice; rerun with a smaller dt")]
    StepSize { t: f64 },

    #[error("transversality failure at event {event_index}: |grad(E) . mu| = {value} < {floor}; event time is not differentiable here")]
    Transversality { event_index: usize, value: f64, floor: f64 },

    #[error("event count changed under perturbation of coordinate {coordinate} (base {base_count}, perturbed {perturbed_count}); retry with a smaller h")]
    NonDifferentiablePoint { coordinate: usize, base_count: usize, perturbed_count: usize },

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch { expected: usize, got: usize, context: String },
}
