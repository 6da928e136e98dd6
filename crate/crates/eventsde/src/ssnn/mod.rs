//! Stochastic leaky integrate-and-fire networks as event systems.
//!
//! Each neuron k carries a membrane potential v, an input current i, and (in
//! the stochastic-firing model) an integrated-intensity clock s:
//!
//! ```text
//! dv = mu1 (i - v) dt + sigma1 dB    di = -mu2 i dt + sigma2 dB'    ds = lambda(v) dt
//! ```
//!
//! Neuron k fires when s^k hits zero from below; the transition resets the
//! clock to log(u) - alpha, drops v by v_reset, and increments the input
//! current of every neuron j by w[k, j]. The deterministic threshold variant
//! drops the clock and fires when v hits the intensity threshold directly.

mod eligibility;
mod online;

pub use eligibility::{eligibility_traces, EligibilityTraces};
pub use online::{gamma_exp, online_sensitivity, OnlineSensitivity};

use ndarray::{Array1, Array2};

use crate::driver::sample_driver;
use crate::error::{Error, Result};
use crate::events::{event_sde_solve, EventSolution, EventSpec, SolveSettings, DEFAULT_ROOT_TOL};
use crate::fields::VectorFields;
use crate::rng::{derive_seed, sample_seed, UniformStream};
use crate::solver::Scheme;

/// Parameters of a SLIF network with intensity lambda(v) = exp((v - psi) / beta),
/// clipped at `lambda_cap` to keep the firing intensity bounded.
#[derive(Debug, Clone)]
pub struct NetworkParams {
    pub k: usize,
    /// w[k, j] is the synaptic weight from neuron k to neuron j.
    pub w: Array2<f64>,
    pub mu: (f64, f64),
    pub sigma: (f64, f64),
    pub v_reset: f64,
    pub alpha: f64,
    pub psi: f64,
    pub beta: f64,
    /// Defaults to lambda(psi + 5 beta) = e^5.
    pub lambda_cap: Option<f64>,
    /// Constant external drive added to each di/dt; off by default.
    pub input_current: Option<Array1<f64>>,
}

impl NetworkParams {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            w: Array2::zeros((k, k)),
            mu: (15.0, 0.0),
            sigma: (0.0, 0.0),
            v_reset: 1.4,
            alpha: 0.03,
            psi: 1.0,
            beta: 0.2,
            lambda_cap: None,
            input_current: None,
        }
    }

    pub fn cap(&self) -> f64 {
        self.lambda_cap.unwrap_or_else(|| 5.0f64.exp())
    }

    pub fn lambda(&self, v: f64) -> f64 {
        ((v - self.psi) / self.beta).exp().min(self.cap())
    }

    pub fn lambda_grad(&self, v: f64) -> f64 {
        let raw = ((v - self.psi) / self.beta).exp();
        if raw >= self.cap() {
            0.0
        } else {
            raw / self.beta
        }
    }

    /// Guaranteed lower bound alpha / C on per-neuron inter-spike gaps.
    pub fn refractory_bound(&self) -> f64 {
        self.alpha / self.cap()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("network needs at least one neuron".into()));
        }
        if self.w.nrows() != self.k || self.w.ncols() != self.k {
            return Err(Error::InvalidArgument(format!(
                "weight matrix must be {k} x {k}, got {r} x {c}",
                k = self.k,
                r = self.w.nrows(),
                c = self.w.ncols()
            )));
        }
        // mu2 = 0 (with sigma2 = 0) degenerates the input current to a
        // constant moved into the initial condition, as in the single-neuron
        // input-current model.
        if !(self.mu.0 > 0.0) || self.mu.1 < 0.0 {
            return Err(Error::InvalidArgument("rates must satisfy mu1 > 0, mu2 >= 0".into()));
        }
        if !(self.v_reset > 0.0 && self.alpha > 0.0 && self.beta > 0.0 && self.cap() > 0.0) {
            return Err(Error::InvalidArgument(
                "v_reset, alpha, beta and the intensity cap must be positive".into(),
            ));
        }
        if let Some(input) = &self.input_current {
            if input.len() != self.k {
                return Err(Error::InvalidArgument(format!(
                    "external input has {} entries for {} neurons",
                    input.len(),
                    self.k
                )));
            }
        }
        Ok(())
    }
}

/// Which firing mechanism the event system encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkKind {
    /// Stochastic firing through the integrated-intensity clock (3 states per neuron).
    StochasticClock,
    /// Deterministic threshold crossing v = psi (2 states per neuron, sigma = 0).
    Threshold,
}

impl NetworkKind {
    pub fn neuron_dim(self) -> usize {
        match self {
            NetworkKind::StochasticClock => 3,
            NetworkKind::Threshold => 2,
        }
    }
}

/// A SLIF network compiled to drift/diffusion fields plus one event spec per
/// neuron. Trainable weight entries are appended to the state as constant
/// coordinates so parameter gradients ride in the same Jacobian.
pub struct SlifSystem {
    pub fields: VectorFields,
    pub specs: Vec<EventSpec>,
    pub params: NetworkParams,
    pub kind: NetworkKind,
    pub trainable: Vec<(usize, usize)>,
}

impl SlifSystem {
    pub fn n_neurons(&self) -> usize {
        self.params.k
    }

    pub fn state_dim(&self) -> usize {
        self.kind.neuron_dim() * self.params.k + self.trainable.len()
    }

    pub fn v_index(&self, k: usize) -> usize {
        self.kind.neuron_dim() * k
    }

    pub fn i_index(&self, k: usize) -> usize {
        self.kind.neuron_dim() * k + 1
    }

    pub fn s_index(&self, k: usize) -> usize {
        debug_assert_eq!(self.kind, NetworkKind::StochasticClock);
        3 * k + 2
    }

    /// State index of the p-th trainable weight.
    pub fn param_index(&self, p: usize) -> usize {
        self.kind.neuron_dim() * self.params.k + p
    }

    /// Initial state: v and i as given (zero by default), clocks drawn as
    /// log(u) - alpha from the seeded stream, trainable weights appended.
    pub fn initial_state(
        &self,
        v0: Option<&[f64]>,
        i0: Option<&[f64]>,
        seed: u64,
    ) -> Array1<f64> {
        let k = self.params.k;
        let mut y = Array1::zeros(self.state_dim());
        let clocks = UniformStream::new(seed);
        for n in 0..k {
            y[self.v_index(n)] = v0.map_or(0.0, |v| v[n]);
            y[self.i_index(n)] = i0.map_or(0.0, |i| i[n]);
            if self.kind == NetworkKind::StochasticClock {
                y[self.s_index(n)] = clocks.draw(n as u64).ln() - self.params.alpha;
            }
        }
        for (p, (from, to)) in self.trainable.iter().enumerate() {
            y[self.param_index(p)] = self.params.w[[*from, *to]];
        }
        y
    }
}

fn weight_source(
    params: &NetworkParams,
    trainable: &[(usize, usize)],
    base: usize,
    from: usize,
    to: usize,
) -> (f64, Option<usize>) {
    match trainable.iter().position(|pair| *pair == (from, to)) {
        Some(p) => (0.0, Some(base + p)),
        None => (params.w[[from, to]], None),
    }
}

fn build_network(
    params: &NetworkParams,
    kind: NetworkKind,
    trainable: &[(usize, usize)],
    reset_to_zero: bool,
) -> Result<SlifSystem> {
    params.validate()?;
    if kind == NetworkKind::Threshold && (params.sigma.0 != 0.0 || params.sigma.1 != 0.0) {
        return Err(Error::InvalidArgument(
            "the threshold model is deterministic; set sigma = (0, 0)".into(),
        ));
    }
    for (from, to) in trainable {
        if *from >= params.k || *to >= params.k {
            return Err(Error::InvalidArgument(format!(
                "trainable weight ({from}, {to}) outside a {k}-neuron network",
                k = params.k
            )));
        }
        if from == to {
            return Err(Error::InvalidArgument("self weights are not part of the model".into()));
        }
    }

    let k = params.k;
    let nd = kind.neuron_dim();
    let base = nd * k;
    let dim = base + trainable.len();
    let noise_dim = 2 * k;

    let p = params.clone();
    let drift = Box::new(move |y: &Array1<f64>| {
        let mut out = Array1::zeros(y.len());
        for n in 0..k {
            let v = y[nd * n];
            let i = y[nd * n + 1];
            out[nd * n] = p.mu.0 * (i - v);
            out[nd * n + 1] =
                -p.mu.1 * i + p.input_current.as_ref().map_or(0.0, |inp| inp[n]);
            if nd == 3 {
                out[nd * n + 2] = p.lambda(v);
            }
        }
        out
    });

    let p = params.clone();
    let drift_jac = Box::new(move |y: &Array1<f64>| {
        let mut out = Array2::zeros((y.len(), y.len()));
        for n in 0..k {
            let v = y[nd * n];
            out[[nd * n, nd * n]] = -p.mu.0;
            out[[nd * n, nd * n + 1]] = p.mu.0;
            out[[nd * n + 1, nd * n + 1]] = -p.mu.1;
            if nd == 3 {
                out[[nd * n + 2, nd * n]] = p.lambda_grad(v);
            }
        }
        out
    });

    let (s1, s2) = params.sigma;
    let diffusion = Box::new(move |_y: &Array1<f64>| {
        let mut out = Array2::zeros((dim, noise_dim));
        for n in 0..k {
            out[[nd * n, 2 * n]] = s1;
            out[[nd * n + 1, 2 * n + 1]] = s2;
        }
        out
    });
    let diffusion_jac =
        Box::new(move |_y: &Array1<f64>| vec![Array2::zeros((dim, dim)); noise_dim]);

    let fields = VectorFields::new(dim, noise_dim, drift, diffusion)
        .with_drift_jacobian(drift_jac)
        .with_diffusion_jacobian(diffusion_jac);

    let mut specs = Vec::with_capacity(k);
    for spiker in 0..k {
        let event_index = match kind {
            NetworkKind::StochasticClock => 3 * spiker + 2,
            NetworkKind::Threshold => 2 * spiker,
        };
        let psi = if kind == NetworkKind::Threshold { params.psi } else { 0.0 };
        let event = Box::new(move |y: &Array1<f64>| y[event_index] - psi);
        let event_grad = Box::new(move |y: &Array1<f64>| {
            let mut g = Array1::zeros(y.len());
            g[event_index] = 1.0;
            g
        });

        // (target index in the state, fixed weight, optional trainable index)
        let increments: Vec<(usize, f64, Option<usize>)> = (0..k)
            .filter(|j| *j != spiker)
            .map(|j| {
                let (fixed, param) = weight_source(params, trainable, base, spiker, j);
                (nd * j + 1, fixed, param)
            })
            .collect();
        let incs = increments.clone();
        let v_idx = nd * spiker;
        let v_reset = params.v_reset;
        let alpha = params.alpha;
        let clock = kind == NetworkKind::StochasticClock;
        let transition = Box::new(move |y: &Array1<f64>, u: f64| {
            let mut out = y.clone();
            for (idx, fixed, param) in &incs {
                out[*idx] += param.map_or(*fixed, |p| y[p]);
            }
            if reset_to_zero {
                out[v_idx] = 0.0;
            } else {
                out[v_idx] -= v_reset;
            }
            if clock {
                out[v_idx + 2] = u.ln() - alpha;
            }
            out
        });
        let incs = increments;
        let transition_jac = Box::new(move |y: &Array1<f64>, _u: f64| {
            let mut jac = Array2::eye(y.len());
            for (idx, _fixed, param) in &incs {
                if let Some(p) = param {
                    jac[[*idx, *p]] = 1.0;
                }
            }
            if reset_to_zero {
                jac[[v_idx, v_idx]] = 0.0;
            }
            if clock {
                jac[[v_idx + 2, v_idx + 2]] = 0.0;
            }
            jac
        });

        specs.push(
            EventSpec::new(spiker, event, transition)
                .with_event_gradient(event_grad)
                .with_transition_jacobian(transition_jac),
        );
    }

    Ok(SlifSystem {
        fields,
        specs,
        params: params.clone(),
        kind,
        trainable: trainable.to_vec(),
    })
}

/// The stochastic-firing network of the main model: state (v, i, s) per
/// neuron, events on the clocks.
pub fn build_slif_network(params: &NetworkParams) -> Result<SlifSystem> {
    build_network(params, NetworkKind::StochasticClock, &[], false)
}

/// Stochastic-firing network with selected weight entries appended to the
/// state as trainable parameters.
pub fn build_slif_network_trainable(
    params: &NetworkParams,
    trainable: &[(usize, usize)],
) -> Result<SlifSystem> {
    build_network(params, NetworkKind::StochasticClock, trainable, false)
}

/// Variant that resets v to exactly zero on spikes. With a constant diffusion
/// this violates the commutation assumption; it exists to exercise the
/// assumption checker.
pub fn build_slif_network_reset_to_zero(params: &NetworkParams) -> Result<SlifSystem> {
    build_network(params, NetworkKind::StochasticClock, &[], true)
}

/// Deterministic threshold LIF network: neuron k fires when v^k reaches psi.
pub fn build_lif_threshold_network(params: &NetworkParams) -> Result<SlifSystem> {
    build_network(params, NetworkKind::Threshold, &[], false)
}

pub fn build_lif_threshold_network_trainable(
    params: &NetworkParams,
    trainable: &[(usize, usize)],
) -> Result<SlifSystem> {
    build_network(params, NetworkKind::Threshold, trainable, false)
}

/// Batch simulation settings. Per-sample seeds are derived as
/// seed XOR hash(sample index); driver noise, transition uniforms and initial
/// clocks use purpose-derived sub-seeds of the sample seed.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub t_end: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub seed: u64,
    pub batch: usize,
    pub n_max: usize,
    pub tol: f64,
    pub resolution: Option<f64>,
    pub v0: Option<Vec<f64>>,
    pub i0: Option<Vec<f64>>,
}

impl SimulationConfig {
    pub fn new(t_end: f64, dt: f64, seed: u64, batch: usize) -> Self {
        Self {
            t_end,
            dt,
            scheme: Scheme::EulerMaruyama,
            seed,
            batch,
            n_max: 100_000,
            tol: DEFAULT_ROOT_TOL,
            resolution: None,
            v0: None,
            i0: None,
        }
    }

    pub fn settings(&self) -> SolveSettings {
        SolveSettings::new(0.0, self.t_end, self.dt, self.n_max)
            .with_scheme(self.scheme)
            .with_tol(self.tol)
    }
}

/// Solves one batch member of a simulation.
pub fn solve_sample(
    system: &SlifSystem,
    cfg: &SimulationConfig,
    sample: usize,
) -> Result<EventSolution> {
    let seed = sample_seed(cfg.seed, sample as u64);
    let driver = sample_driver(
        2 * system.n_neurons(),
        0.0,
        cfg.t_end,
        cfg.resolution.unwrap_or(cfg.dt),
        derive_seed(seed, "driver"),
    )?;
    let uniforms = UniformStream::new(derive_seed(seed, "events"));
    let y0 = system.initial_state(
        cfg.v0.as_deref(),
        cfg.i0.as_deref(),
        derive_seed(seed, "init"),
    );
    event_sde_solve(&y0, &system.fields, &system.specs, &driver, &uniforms, &cfg.settings())
}

/// Streams the batch solutions through a callback without retaining them.
pub fn for_each_solution(
    system: &SlifSystem,
    cfg: &SimulationConfig,
    mut f: impl FnMut(usize, &EventSolution) -> Result<()>,
) -> Result<()> {
    for sample in 0..cfg.batch {
        let solution = solve_sample(system, cfg, sample)?;
        f(sample, &solution)?;
    }
    Ok(())
}

/// Batch simulation returning per-sample, per-neuron spike-time lists.
pub fn simulate_spike_trains(
    params: &NetworkParams,
    cfg: &SimulationConfig,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let system = build_slif_network(params)?;
    let mut trains = Vec::with_capacity(cfg.batch);
    for_each_solution(&system, cfg, |_sample, solution| {
        trains.push(solution.spike_trains(params.k));
        Ok(())
    })?;
    Ok(trains)
}
