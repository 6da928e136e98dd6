//! Solver for stochastic differential equations with implicitly triggered
//! event discontinuities, plus exact pathwise forward-mode sensitivities of
//! trajectories and event times.
//!
//! The crate is organized bottom-up:
//!
//! - [`rng`]: counter-based random number generation; every random quantity is
//!   a pure function of `(seed, counter)`, so runs are reproducible and batch
//!   work needs no sequential generator state.
//! - [`driver`]: seeded Brownian paths sampled on a fine grid with
//!   deterministic piecewise-linear interpolation.
//! - [`fields`]: drift/diffusion vector fields with optional analytic
//!   Jacobians (finite-difference fallback).
//! - [`solver`]: Heun (Stratonovich) and Euler-Maruyama stepping of the
//!   inter-event dynamics.
//! - [`events`]: event detection, event-time localization by root finding,
//!   and transition application.
//! - [`sensitivity`]: the variational equation between events and the
//!   event-time / transition gradient recursion, with a finite-difference
//!   oracle and model-assumption checks.
//! - [`ssnn`]: stochastic leaky integrate-and-fire networks expressed as
//!   event systems, online per-weight sensitivities, and eligibility traces.

pub mod driver;
pub mod error;
pub mod events;
pub mod fields;
pub mod rng;
pub mod sensitivity;
pub mod solver;
pub mod ssnn;

pub use driver::{sample_driver, BrownianDriver};
pub use error::{Error, Result};
pub use events::{
    apply_transition, event_sde_solve, locate_event, EventSolution, EventSpec, SolveSettings,
};
pub use fields::VectorFields;
pub use sensitivity::{
    check_assumptions, event_time_gradient, finite_difference_oracle, forward_sensitivity,
    transition_gradient, variational_segment, AssumptionRecord, AssumptionReport,
    ForwardSensitivity, OracleOutput, SensitivityState,
};
pub use solver::{
    euler_maruyama_step, sde_step, solve_segment, stratonovich_step, PathSegment, Scheme,
};
