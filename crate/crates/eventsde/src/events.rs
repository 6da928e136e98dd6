//! Event detection, event-time localization, and transition application.
//!
//! The solver integrates the inter-event dynamics with fixed steps, watches
//! every event function for a sign change across each step (the convention is
//! e <= 0 before an event), localizes the crossing by bisection with a secant
//! polish, applies the transition, and continues from the event time.

use ndarray::{Array1, Array2};

use crate::driver::BrownianDriver;
use crate::error::{Error, Result};
use crate::fields::{fd_step, VectorFields};
use crate::rng::UniformStream;
use crate::solver::{sde_step, PathSegment, Scheme};

/// Absolute tolerance on the event-function value used by default.
pub const DEFAULT_ROOT_TOL: f64 = 1e-10;

/// Bisection budget for event localization.
const MAX_BISECTIONS: usize = 64;

pub type EventFn = dyn Fn(&Array1<f64>) -> f64 + Send + Sync;
pub type EventGradFn = dyn Fn(&Array1<f64>) -> Array1<f64> + Send + Sync;
pub type TransitionFn = dyn Fn(&Array1<f64>, f64) -> Array1<f64> + Send + Sync;
pub type TransitionJacFn = dyn Fn(&Array1<f64>, f64) -> Array2<f64> + Send + Sync;

/// One event type: an event function, its transition, and optional analytic
/// derivatives. Transitions receive a uniform sample in (0, 1] so they may be
/// randomized; deterministic transitions simply ignore it.
pub struct EventSpec {
    pub label: usize,
    event: Box<EventFn>,
    transition: Box<TransitionFn>,
    event_grad: Option<Box<EventGradFn>>,
    transition_jac: Option<Box<TransitionJacFn>>,
}

impl EventSpec {
    pub fn new(label: usize, event: Box<EventFn>, transition: Box<TransitionFn>) -> Self {
        Self { label, event, transition, event_grad: None, transition_jac: None }
    }

    pub fn with_event_gradient(mut self, grad: Box<EventGradFn>) -> Self {
        self.event_grad = Some(grad);
        self
    }

    pub fn with_transition_jacobian(mut self, jac: Box<TransitionJacFn>) -> Self {
        self.transition_jac = Some(jac);
        self
    }

    pub fn event(&self, y: &Array1<f64>) -> f64 {
        (self.event)(y)
    }

    pub fn transition(&self, y: &Array1<f64>, u: f64) -> Array1<f64> {
        (self.transition)(y, u)
    }

    /// Row vector grad(E)(y), analytic or central finite differences.
    pub fn event_gradient(&self, y: &Array1<f64>) -> Array1<f64> {
        if let Some(grad) = &self.event_grad {
            return grad(y);
        }
        let h = fd_step(y);
        let mut out = Array1::zeros(y.len());
        for i in 0..y.len() {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[i] += h;
            ym[i] -= h;
            out[i] = ((self.event)(&yp) - (self.event)(&ym)) / (2.0 * h);
        }
        out
    }

    /// Jacobian grad(T)(y) at the frozen uniform sample `u`.
    pub fn transition_jacobian(&self, y: &Array1<f64>, u: f64) -> Array2<f64> {
        if let Some(jac) = &self.transition_jac {
            return jac(y, u);
        }
        let h = fd_step(y);
        let e = y.len();
        let mut out = Array2::zeros((e, e));
        for i in 0..e {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[i] += h;
            ym[i] -= h;
            let col = ((self.transition)(&yp, u) - (self.transition)(&ym, u)) / (2.0 * h);
            out.column_mut(i).assign(&col);
        }
        out
    }
}

/// Applies the transition and validates that the output does not land in the
/// kernel of this event type (the no-immediate-retrigger assumption).
pub fn apply_transition(spec: &EventSpec, y: &Array1<f64>, u: f64) -> Result<Array1<f64>> {
    let out = spec.transition(y, u);
    let e = spec.event(&out);
    if e >= -DEFAULT_ROOT_TOL {
        return Err(Error::KernelViolation { t: f64::NAN, label: spec.label, value: e });
    }
    Ok(out)
}

/// A solved event trajectory: one path segment per inter-event interval plus
/// the ordered event record.
#[derive(Debug, Clone)]
pub struct EventSolution {
    pub segments: Vec<PathSegment>,
    pub event_times: Vec<f64>,
    pub event_labels: Vec<usize>,
    pub event_u: Vec<f64>,
    pub pre_event_states: Vec<Array1<f64>>,
    pub post_event_states: Vec<Array1<f64>>,
    pub final_state: Array1<f64>,
    pub final_time: f64,
}

impl EventSolution {
    pub fn n_events(&self) -> usize {
        self.event_times.len()
    }

    /// Event times grouped by label, e.g. per-neuron spike trains.
    pub fn spike_trains(&self, n_labels: usize) -> Vec<Vec<f64>> {
        let mut trains = vec![Vec::new(); n_labels];
        for (t, label) in self.event_times.iter().zip(&self.event_labels) {
            trains[*label].push(*t);
        }
        trains
    }

    /// Smallest gap between consecutive events of the same label.
    pub fn min_gap_per_label(&self, n_labels: usize) -> Option<f64> {
        self.spike_trains(n_labels)
            .iter()
            .flat_map(|train| train.windows(2).map(|w| w[1] - w[0]))
            .fold(None, |acc, gap| Some(acc.map_or(gap, |m: f64| m.min(gap))))
    }
}

/// Solve settings shared by the event solver and the sensitivity pass.
#[derive(Debug, Clone, Copy)]
pub struct SolveSettings {
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub n_max: usize,
    pub tol: f64,
    pub scheme: Scheme,
}

impl SolveSettings {
    pub fn new(t0: f64, t_end: f64, dt: f64, n_max: usize) -> Self {
        Self { t0, t_end, dt, n_max, tol: DEFAULT_ROOT_TOL, scheme: Scheme::Heun }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Localizes the event time inside [t0, t0 + dt] by bisection with one secant
/// polish, given a sign change E(flow(t0)) < 0 <= E(flow(t0 + dt)).
///
/// Every probe re-solves from (y0, t0) with a single step, so the probed
/// function is a deterministic function of t under the frozen driver.
pub fn locate_event<F: Fn(&Array1<f64>) -> f64>(
    y0: &Array1<f64>,
    t0: f64,
    dt: f64,
    fields: &VectorFields,
    driver: &BrownianDriver,
    event_fn: F,
    tol: f64,
    scheme: Scheme,
) -> Result<(f64, Array1<f64>)> {
    let flow = |t: f64| -> Result<Array1<f64>> {
        if t <= t0 {
            Ok(y0.clone())
        } else {
            sde_step(y0, t0, t - t0, fields, driver, scheme)
        }
    };
    let mut lo = t0;
    let mut g_lo = event_fn(y0);
    let mut hi = t0 + dt;
    let hi_state = flow(hi)?;
    let mut g_hi = event_fn(&hi_state);
    if !(g_lo < 0.0 && g_hi >= 0.0) {
        return Err(Error::NoBracket { t0, t1: hi, e_lo: g_lo, e_hi: g_hi });
    }
    if g_hi == 0.0 {
        return Ok((hi, hi_state));
    }
    let mut best_t = hi;
    let mut best_g = g_hi;
    let mut converged = false;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let y_mid = flow(mid)?;
        let g_mid = event_fn(&y_mid);
        if g_mid.abs() < best_g.abs() {
            best_t = mid;
            best_g = g_mid;
        }
        if g_mid >= 0.0 {
            hi = mid;
            g_hi = g_mid;
        } else {
            lo = mid;
            g_lo = g_mid;
        }
        if best_g.abs() <= tol || (hi - lo) <= tol * dt {
            converged = true;
            break;
        }
    }
    // Secant polish on the final bracket; the driver enters only through
    // probed values, never through an analytic time derivative.
    if (g_hi - g_lo).abs() > 0.0 {
        let t_sec = (hi - g_hi * (hi - lo) / (g_hi - g_lo)).clamp(lo, hi);
        let y_sec = flow(t_sec)?;
        let g_sec = event_fn(&y_sec);
        if g_sec.abs() < best_g.abs() {
            best_t = t_sec;
            best_g = g_sec;
        }
    }
    if !(converged || best_g.abs() <= tol || (hi - lo) <= tol * dt) {
        return Err(Error::NoConvergence { iterations: MAX_BISECTIONS, residual: best_g });
    }
    let y_star = flow(best_t)?;
    Ok((best_t, y_star))
}

fn crossing_labels(
    specs: &[EventSpec],
    y_from: &Array1<f64>,
    y_to: &Array1<f64>,
) -> Vec<usize> {
    specs
        .iter()
        .enumerate()
        .filter(|(_, spec)| spec.event(y_from) < 0.0 && spec.event(y_to) >= 0.0)
        .map(|(k, _)| k)
        .collect()
}

/// Runs the event solve: step, detect the earliest crossing, localize it,
/// transition, continue; stop at `n_max` events or at `t_end`. When `n_max`
/// events occur first, the returned state is the one immediately after the
/// last transition, matching the solve loop's guard.
pub fn event_sde_solve(
    y0: &Array1<f64>,
    fields: &VectorFields,
    specs: &[EventSpec],
    driver: &BrownianDriver,
    uniforms: &UniformStream,
    settings: &SolveSettings,
) -> Result<EventSolution> {
    if !(settings.dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {}", settings.dt)));
    }
    if settings.t_end < settings.t0 {
        return Err(Error::InvalidArgument(format!(
            "t_end {} precedes t0 {}",
            settings.t_end, settings.t0
        )));
    }
    if !(driver.contains(settings.t0) && driver.contains(settings.t_end)) {
        return Err(Error::InvalidArgument(
            "driver span does not cover the solve interval".into(),
        ));
    }
    for spec in specs {
        let e = spec.event(y0);
        if e >= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "event function {} is already nonnegative at the initial state (e = {e})",
                spec.label
            )));
        }
    }

    let mut solution = EventSolution {
        segments: Vec::new(),
        event_times: Vec::new(),
        event_labels: Vec::new(),
        event_u: Vec::new(),
        pre_event_states: Vec::new(),
        post_event_states: Vec::new(),
        final_state: y0.clone(),
        final_time: settings.t0,
    };
    if settings.n_max == 0 {
        solution.segments.push(PathSegment { times: vec![settings.t0], states: vec![y0.clone()] });
        return Ok(solution);
    }

    let mut t = settings.t0;
    let mut y = y0.clone();
    let mut seg_times = vec![t];
    let mut seg_states = vec![y.clone()];
    let time_eps = 1e-12 * (settings.t_end - settings.t0).max(1.0);

    while t < settings.t_end - time_eps {
        let remaining = settings.t_end - t;
        let h_full = if remaining <= settings.dt * (1.0 + 1e-9) { remaining } else { settings.dt };
        let y_next = sde_step(&y, t, h_full, fields, driver, settings.scheme)?;
        let crossed = crossing_labels(specs, &y, &y_next);

        if crossed.is_empty() {
            t = if h_full == remaining { settings.t_end } else { t + h_full };
            y = y_next;
            seg_times.push(t);
            seg_states.push(y.clone());
            continue;
        }

        // With several crossing types in one step, halving the examination
        // window (at most twice) usually isolates the earliest one cheaply;
        // surviving candidates are all localized and the earliest wins, ties
        // broken by the lowest label index. Distinct labels whose located
        // times coincide within the localization resolution cannot be
        // ordered at this dt and raise the step-size error.
        let (bracket, candidates) = if crossed.len() == 1 {
            (h_full, crossed)
        } else {
            let mut window = (h_full, crossed);
            for _ in 0..2 {
                let h = window.0 * 0.5;
                let y_half = sde_step(&y, t, h, fields, driver, settings.scheme)?;
                let sub = crossing_labels(specs, &y, &y_half);
                match sub.len() {
                    0 => break,
                    1 => {
                        window = (h, sub);
                        break;
                    }
                    _ => window = (h, sub),
                }
            }
            window
        };

        let mut located: Vec<(f64, Array1<f64>, usize)> = Vec::with_capacity(candidates.len());
        for label in candidates {
            let (t_star, y_star) = locate_event(
                &y,
                t,
                bracket,
                fields,
                driver,
                |state| specs[label].event(state),
                settings.tol,
                settings.scheme,
            )?;
            located.push((t_star, y_star, label));
        }
        located.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        if located.len() > 1 {
            let gap = located[1].0 - located[0].0;
            if gap > 0.0 && gap <= settings.tol * bracket {
                return Err(Error::StepSize { t: located[0].0 });
            }
        }
        let (t_star, y_star, label) = located.swap_remove(0);

        // close the segment at the event time
        seg_times.push(t_star);
        seg_states.push(y_star.clone());
        solution.segments.push(PathSegment { times: seg_times, states: seg_states });

        let u = uniforms.draw(solution.event_times.len() as u64);
        let y_post = specs[label].transition(&y_star, u);
        for spec in specs {
            let e_post = spec.event(&y_post);
            if e_post >= -settings.tol {
                return Err(Error::KernelViolation { t: t_star, label: spec.label, value: e_post });
            }
        }

        solution.event_times.push(t_star);
        solution.event_labels.push(label);
        solution.event_u.push(u);
        solution.pre_event_states.push(y_star);
        solution.post_event_states.push(y_post.clone());

        t = t_star;
        y = y_post;
        if solution.event_times.len() == settings.n_max {
            solution.final_state = y;
            solution.final_time = t;
            return Ok(solution);
        }
        seg_times = vec![t];
        seg_states = vec![y.clone()];
    }

    solution.segments.push(PathSegment { times: seg_times, states: seg_states });
    solution.final_state = y;
    solution.final_time = settings.t_end;
    Ok(solution)
}
