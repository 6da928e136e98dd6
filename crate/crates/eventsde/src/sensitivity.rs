//! Forward-mode pathwise sensitivities through events.
//!
//! Between events the Jacobian of the state with respect to the initial
//! condition follows the variational equation, integrated with the same
//! scheme and steps as the primal solve. At each event the event-time
//! gradient and the post-transition Jacobian seed are given by the recursion
//!
//! ```text
//! d(tau)  = - grad(E) J_pre / (grad(E) . mu)
//! J_seed  = grad(T) J_pre - (mu(y_post) - grad(T) mu(y_pre)) d(tau)
//! ```
//!
//! Parameters are handled by state augmentation (a parameter is a state
//! coordinate with zero drift), so gradients with respect to parameters are
//! columns of the same Jacobian. The piecewise-linear Brownian interpolation
//! contributes zero time-derivative everywhere.

use ndarray::{Array1, Array2};

use crate::driver::BrownianDriver;
use crate::error::{Error, Result};
use crate::events::{event_sde_solve, EventSolution, EventSpec, SolveSettings};
use crate::fields::VectorFields;
use crate::rng::UniformStream;
use crate::solver::{PathSegment, Scheme};

/// Default absolute tolerance for the assumption residuals.
pub const ASSUMPTION_ATOL: f64 = 1e-8;
/// Transversality floor: |grad(E) . mu| below this aborts differentiation.
pub const TRANSVERSALITY_FLOOR: f64 = 1e-8;

/// Jacobian of the current state and the event-time gradients accumulated so
/// far, all with respect to the initial condition.
#[derive(Debug, Clone)]
pub struct SensitivityState {
    pub jac_state: Array2<f64>,
    pub event_time_grads: Vec<Array1<f64>>,
    pub t: f64,
}

/// Residuals of the differentiability assumptions at one event.
#[derive(Debug, Clone)]
pub struct AssumptionRecord {
    pub event_index: usize,
    pub label: usize,
    /// max-abs of sigma(T(y)) - grad(T)(y) sigma(y)
    pub commutation_residual: f64,
    /// max-abs of grad(E)(y) sigma(y)
    pub orthogonality_residual: f64,
    /// grad(E)(y) . mu(y)
    pub transversality: f64,
}

impl AssumptionRecord {
    pub fn pass(&self, atol: f64, floor: f64) -> bool {
        self.commutation_residual <= atol
            && self.orthogonality_residual <= atol
            && self.transversality.abs() >= floor
    }
}

#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub records: Vec<AssumptionRecord>,
    pub atol: f64,
    pub transversality_floor: f64,
}

impl AssumptionReport {
    pub fn pass(&self) -> bool {
        self.records.iter().all(|r| r.pass(self.atol, self.transversality_floor))
    }

    /// The event-time denominator grad(E) . mu must keep one sign across a
    /// model's events of each type when the transversality assumption holds.
    pub fn transversality_sign_consistent(&self) -> bool {
        let mut signs: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
        for record in &self.records {
            let sign = record.transversality.signum();
            match signs.get(&record.label) {
                Some(existing) if *existing != sign => return false,
                Some(_) => {}
                None => {
                    signs.insert(record.label, sign);
                }
            }
        }
        true
    }
}

/// Integrates dJ = grad(mu) J dt + sum_m grad(sigma_m) J dB_m along a stored
/// segment, replaying the primal scheme step for step.
pub fn variational_segment(
    segment: &PathSegment,
    j0: &Array2<f64>,
    fields: &VectorFields,
    driver: &BrownianDriver,
    scheme: Scheme,
) -> Result<Array2<f64>> {
    let e = fields.dim();
    if j0.nrows() != e || j0.ncols() != e {
        return Err(Error::DimensionMismatch {
            expected: e,
            got: j0.nrows(),
            context: "variational initial Jacobian".into(),
        });
    }
    let mut jac = j0.clone();
    for i in 0..segment.len().saturating_sub(1) {
        let t_a = segment.times[i];
        let t_b = segment.times[i + 1];
        let h = t_b - t_a;
        let y = &segment.states[i];
        let db = driver.increment(t_a, t_b)?;
        let a0 = fields.drift_jacobian(y);
        let ds0 = fields.diffusion_jacobian(y);
        let apply = |a: &Array2<f64>, ds: &[Array2<f64>], j: &Array2<f64>| -> Array2<f64> {
            let mut out = a.dot(j) * h;
            for (m, dsm) in ds.iter().enumerate() {
                if db[m] != 0.0 {
                    out = out + dsm.dot(j) * db[m];
                }
            }
            out
        };
        match scheme {
            Scheme::EulerMaruyama => {
                jac = &jac + &apply(&a0, &ds0, &jac);
            }
            Scheme::Heun => {
                // predictor state of the primal Heun step, recomputed from the
                // stored node
                let mu0 = fields.drift(y);
                let sig0 = fields.diffusion(y);
                let y_pred = y + &(mu0 * h) + sig0.dot(&db);
                let a1 = fields.drift_jacobian(&y_pred);
                let ds1 = fields.diffusion_jacobian(&y_pred);
                let j_pred = &jac + &apply(&a0, &ds0, &jac);
                jac = &jac + &((apply(&a0, &ds0, &jac) + apply(&a1, &ds1, &j_pred)) * 0.5);
            }
        }
    }
    Ok(jac)
}

/// Event-time gradient row: -(grad(E) J_pre) / (grad(E) . mu).
pub fn event_time_gradient(
    grad_pre: &Array2<f64>,
    y_pre: &Array1<f64>,
    fields: &VectorFields,
    spec: &EventSpec,
) -> Result<Array1<f64>> {
    let grad_e = spec.event_gradient(y_pre);
    let denom = grad_e.dot(&fields.drift(y_pre));
    if denom.abs() < TRANSVERSALITY_FLOOR {
        return Err(Error::Transversality {
            event_index: spec.label,
            value: denom.abs(),
            floor: TRANSVERSALITY_FLOOR,
        });
    }
    Ok(grad_e.dot(grad_pre) * (-1.0 / denom))
}

/// Post-transition Jacobian seed (the bracketed factor of the recursion):
/// grad(T) J_pre - (mu(y_post) - grad(T) mu(y_pre)) outer d(tau).
pub fn transition_gradient(
    grad_pre: &Array2<f64>,
    grad_tau: &Array1<f64>,
    y_pre: &Array1<f64>,
    y_post: &Array1<f64>,
    fields: &VectorFields,
    spec: &EventSpec,
    u: f64,
) -> Result<Array2<f64>> {
    let e = fields.dim();
    if grad_pre.nrows() != e || grad_tau.len() != e {
        return Err(Error::DimensionMismatch {
            expected: e,
            got: grad_pre.nrows().min(grad_tau.len()),
            context: "transition gradient inputs".into(),
        });
    }
    let jac_t = spec.transition_jacobian(y_pre, u);
    let mut seed = jac_t.dot(grad_pre);
    let drift_jump = fields.drift(y_post) - jac_t.dot(&fields.drift(y_pre));
    for r in 0..e {
        if drift_jump[r] != 0.0 {
            for c in 0..e {
                seed[[r, c]] -= drift_jump[r] * grad_tau[c];
            }
        }
    }
    Ok(seed)
}

/// Evaluates the three assumption residuals at every recorded event.
pub fn check_assumptions(
    solution: &EventSolution,
    fields: &VectorFields,
    specs: &[EventSpec],
) -> AssumptionReport {
    let mut records = Vec::with_capacity(solution.n_events());
    for n in 0..solution.n_events() {
        let label = solution.event_labels[n];
        let spec = &specs[label];
        let y_pre = &solution.pre_event_states[n];
        let y_post = &solution.post_event_states[n];
        let u = solution.event_u[n];
        let jac_t = spec.transition_jacobian(y_pre, u);
        let commutation = &fields.diffusion(y_post) - &jac_t.dot(&fields.diffusion(y_pre));
        let grad_e = spec.event_gradient(y_pre);
        let orthogonality = grad_e.dot(&fields.diffusion(y_pre));
        let transversality = grad_e.dot(&fields.drift(y_pre));
        records.push(AssumptionRecord {
            event_index: n,
            label,
            commutation_residual: commutation.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            orthogonality_residual: orthogonality.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            transversality,
        });
    }
    AssumptionReport { records, atol: ASSUMPTION_ATOL, transversality_floor: TRANSVERSALITY_FLOOR }
}

/// Full forward solve and sensitivity pass.
#[derive(Debug, Clone)]
pub struct ForwardSensitivity {
    pub solution: EventSolution,
    pub sensitivity: SensitivityState,
    pub assumptions: AssumptionReport,
}

/// Runs the event solve while co-propagating the Jacobian through every
/// inter-event segment and event. The assumption report is attached so
/// callers can inspect models that only approximately satisfy the
/// differentiability conditions.
pub fn forward_sensitivity(
    y0: &Array1<f64>,
    fields: &VectorFields,
    specs: &[EventSpec],
    driver: &BrownianDriver,
    uniforms: &UniformStream,
    settings: &SolveSettings,
) -> Result<ForwardSensitivity> {
    let solution = event_sde_solve(y0, fields, specs, driver, uniforms, settings)?;
    let e = fields.dim();
    let mut jac = Array2::eye(e);
    let mut event_time_grads = Vec::with_capacity(solution.n_events());
    for n in 0..solution.n_events() {
        jac = variational_segment(&solution.segments[n], &jac, fields, driver, settings.scheme)?;
        let y_pre = &solution.pre_event_states[n];
        let y_post = &solution.post_event_states[n];
        let spec = &specs[solution.event_labels[n]];
        let grad_tau = event_time_gradient(&jac, y_pre, fields, spec).map_err(|err| match err {
            Error::Transversality { value, floor, .. } => {
                Error::Transversality { event_index: n, value, floor }
            }
            other => other,
        })?;
        jac = transition_gradient(&jac, &grad_tau, y_pre, y_post, fields, spec, solution.event_u[n])?;
        if jac.iter().any(|v| !v.is_finite()) || grad_tau.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                t: solution.event_times[n],
                context: format!("sensitivity propagation through event {n}"),
            });
        }
        event_time_grads.push(grad_tau);
    }
    if solution.segments.len() > solution.n_events() {
        let last = solution.segments.last().unwrap();
        jac = variational_segment(last, &jac, fields, driver, settings.scheme)?;
    }
    let assumptions = check_assumptions(&solution, fields, specs);
    let sensitivity =
        SensitivityState { jac_state: jac, event_time_grads, t: solution.final_time };
    Ok(ForwardSensitivity { solution, sensitivity, assumptions })
}

/// Which scalar output the finite-difference oracle differentiates.
#[derive(Debug, Clone, Copy)]
pub enum OracleOutput {
    /// tau_n (0-based event index)
    EventTime(usize),
    /// component of the final state
    FinalState(usize),
}

fn extract_output(solution: &EventSolution, output: OracleOutput) -> Result<f64> {
    match output {
        OracleOutput::EventTime(n) => solution.event_times.get(n).copied().ok_or_else(|| {
            Error::InvalidArgument(format!(
                "oracle requested event {n} but only {} occurred",
                solution.n_events()
            ))
        }),
        OracleOutput::FinalState(i) => solution.final_state.get(i).copied().ok_or_else(|| {
            Error::InvalidArgument(format!("oracle requested state component {i}"))
        }),
    }
}

/// Central finite differences of a solve output with respect to every initial
/// coordinate, under a frozen driver and uniform stream. A perturbation that
/// changes the event count is reported as a non-differentiable point.
pub fn finite_difference_oracle(
    y0: &Array1<f64>,
    fields: &VectorFields,
    specs: &[EventSpec],
    driver: &BrownianDriver,
    uniforms: &UniformStream,
    settings: &SolveSettings,
    output: OracleOutput,
    h: f64,
) -> Result<Array1<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("oracle step must be positive, got {h}")));
    }
    let base = event_sde_solve(y0, fields, specs, driver, uniforms, settings)?;
    let base_count = base.n_events();
    let mut grad = Array1::zeros(y0.len());
    for i in 0..y0.len() {
        let mut values = [0.0; 2];
        for (side, sign) in [(0usize, 1.0), (1usize, -1.0)] {
            let mut y = y0.clone();
            y[i] += sign * h;
            let sol = event_sde_solve(&y, fields, specs, driver, uniforms, settings)?;
            if sol.n_events() != base_count {
                return Err(Error::NonDifferentiablePoint {
                    coordinate: i,
                    base_count,
                    perturbed_count: sol.n_events(),
                });
            }
            values[side] = extract_output(&sol, output)?;
        }
        grad[i] = (values[0] - values[1]) / (2.0 * h);
    }
    Ok(grad)
}
