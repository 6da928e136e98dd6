//! MMD loss and its gradient with respect to trainable network parameters.
//!
//! The generated batch is simulated with forward sensitivities; the loss is
//! the unbiased signature-kernel MMD against the (constant) data batch, and
//! the total gradient chains the kernel's spike-time gradients with the
//! pathwise spike-time sensitivities. Parameters live inside the state:
//! initial coordinates directly, weight entries by augmentation.

use ndarray::Array1;

use eventsde::rng::{derive_seed, sample_seed, UniformStream};
use eventsde::ssnn::{
    build_slif_network, build_slif_network_trainable, NetworkParams, SimulationConfig, SlifSystem,
};
use eventsde::{forward_sensitivity, sample_driver};
use sigkernel::{mmd_from_features, spike_signature_gradients, KernelConfig, TruncatedSignature};

use crate::error::{Error, Result};

/// Which parameters the gradient is taken with respect to.
#[derive(Debug, Clone)]
pub enum Trainable {
    /// Initial-state coordinates (parameters moved into the initial condition).
    InitialCoords(Vec<usize>),
    /// Synaptic weight entries, appended to the state by augmentation.
    Weights(Vec<(usize, usize)>),
}

impl Trainable {
    pub fn len(&self) -> usize {
        match self {
            Trainable::InitialCoords(coords) => coords.len(),
            Trainable::Weights(pairs) => pairs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct LossConfig {
    pub kernel: KernelConfig,
    pub sim: SimulationConfig,
    /// Pair each generated path with the data path of nearest spike count
    /// before evaluating the estimator.
    pub count_matching: bool,
    /// Treat an exhausted event budget as an error instead of truncating.
    pub error_on_event_budget: bool,
    /// Neurons whose spike trains enter the loss; all of them by default.
    pub observed: Option<Vec<usize>>,
}

#[derive(Debug)]
pub struct LossReport {
    pub loss: f64,
    pub gradient: Array1<f64>,
    pub generated: Vec<Vec<Vec<f64>>>,
}

fn spike_count(trains: &[Vec<f64>]) -> usize {
    trains.iter().map(Vec::len).sum()
}

/// Pairs each generated path with the data path of nearest total spike count
/// (with replacement, ties to the earliest data path). The count-matched
/// multiset stands in for the data batch, removing the count-mismatch
/// component of the loss that pathwise spike-time gradients cannot see.
fn match_by_count<'d>(
    generated: &[Vec<Vec<f64>>],
    data: &'d [Vec<Vec<f64>>],
) -> Vec<&'d Vec<Vec<f64>>> {
    let data_counts: Vec<isize> = data.iter().map(|d| spike_count(d) as isize).collect();
    generated
        .iter()
        .map(|g| {
            let count = spike_count(g) as isize;
            let nearest = data_counts
                .iter()
                .enumerate()
                .min_by_key(|(_, c)| (**c - count).abs())
                .map(|(i, _)| i)
                .expect("data batch is nonempty");
            &data[nearest]
        })
        .collect()
}

/// Simulates the generated batch, evaluates the unbiased MMD against the data
/// batch, and assembles the loss gradient with respect to the trainable
/// parameters.
pub fn loss_and_gradient(
    params: &NetworkParams,
    trainable: &Trainable,
    data: &[Vec<Vec<f64>>],
    gen_batch: usize,
    seed: u64,
    cfg: &LossConfig,
) -> Result<LossReport> {
    if gen_batch < 2 || data.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "unbiased MMD needs batches of at least two paths, got {gen_batch} generated and {} data",
            data.len()
        )));
    }
    if data.iter().any(|trains| trains.len() != params.k) {
        return Err(Error::InvalidArgument(format!(
            "data spike trains must cover all {} neurons",
            params.k
        )));
    }
    let system: SlifSystem = match trainable {
        Trainable::InitialCoords(coords) => {
            let system = build_slif_network(params)?;
            for c in coords {
                if *c >= system.state_dim() {
                    return Err(Error::InvalidArgument(format!(
                        "initial coordinate {c} outside state of dimension {}",
                        system.state_dim()
                    )));
                }
            }
            system
        }
        Trainable::Weights(pairs) => build_slif_network_trainable(params, pairs)?,
    };

    let k = params.k;
    let mut generated = Vec::with_capacity(gen_batch);
    // per path: spike-time gradient rows grouped as [neuron][occurrence]
    let mut tau_grads: Vec<Vec<Vec<Array1<f64>>>> = Vec::with_capacity(gen_batch);
    for sample in 0..gen_batch {
        let seed_i = sample_seed(seed, sample as u64);
        let driver = sample_driver(
            2 * k,
            0.0,
            cfg.sim.t_end,
            cfg.sim.resolution.unwrap_or(cfg.sim.dt),
            derive_seed(seed_i, "driver"),
        )?;
        let uniforms = UniformStream::new(derive_seed(seed_i, "events"));
        let y0 = system.initial_state(
            cfg.sim.v0.as_deref(),
            cfg.sim.i0.as_deref(),
            derive_seed(seed_i, "init"),
        );
        let fs = forward_sensitivity(
            &y0,
            &system.fields,
            &system.specs,
            &driver,
            &uniforms,
            &cfg.sim.settings(),
        )?;
        if cfg.error_on_event_budget
            && fs.solution.n_events() == cfg.sim.n_max
            && fs.solution.final_time < cfg.sim.t_end
        {
            return Err(Error::EventBudget { seed: seed_i, n_max: cfg.sim.n_max });
        }
        let mut per_neuron: Vec<Vec<Array1<f64>>> = vec![Vec::new(); k];
        for (n, label) in fs.solution.event_labels.iter().enumerate() {
            per_neuron[*label].push(fs.sensitivity.event_time_grads[n].clone());
        }
        generated.push(fs.solution.spike_trains(k));
        tau_grads.push(per_neuron);
    }

    let observed: Vec<usize> = match &cfg.observed {
        Some(list) => {
            for n in list {
                if *n >= k {
                    return Err(Error::InvalidArgument(format!(
                        "observed neuron {n} outside a {k}-neuron network"
                    )));
                }
            }
            list.clone()
        }
        None => (0..k).collect(),
    };
    let restrict = |trains: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        observed.iter().map(|n| trains[*n].clone()).collect()
    };
    let generated_observed: Vec<Vec<Vec<f64>>> = generated.iter().map(restrict).collect();
    let data_observed: Vec<Vec<Vec<f64>>> = data.iter().map(restrict).collect();

    let matched: Vec<&Vec<Vec<f64>>> = if cfg.count_matching {
        match_by_count(&generated_observed, &data_observed)
    } else {
        data_observed.iter().collect()
    };

    let t_end = cfg.sim.t_end;
    let data_features: Vec<TruncatedSignature> = matched
        .iter()
        .map(|trains| {
            let path = sigkernel::spikes_to_path(trains, t_end)?;
            sigkernel::signature_features(&path, &cfg.kernel)
        })
        .collect::<sigkernel::Result<_>>()?;
    let mut gen_features = Vec::with_capacity(gen_batch);
    let mut gen_spike_grads = Vec::with_capacity(gen_batch);
    for trains in &generated_observed {
        let (sig, grads) = spike_signature_gradients(trains, t_end, &cfg.kernel)?;
        gen_features.push(sig);
        gen_spike_grads.push(grads);
    }

    let loss = mmd_from_features(&data_features, &gen_features)?;

    // dL/dS(gen_p) = 2/(n(n-1)) (sum_q S_q - S_p) - 2/(mn) sum_i X_i
    let m = data_features.len();
    let n = gen_features.len();
    let mut sum_gen = TruncatedSignature::zero(gen_features[0].dim, cfg.kernel.depth)?;
    for f in &gen_features {
        sum_gen = sum_gen.add(f);
    }
    let mut sum_data = TruncatedSignature::zero(gen_features[0].dim, cfg.kernel.depth)?;
    for f in &data_features {
        sum_data = sum_data.add(f);
    }
    let coeff_gen = 2.0 / (n * (n - 1)) as f64;
    let coeff_cross = 2.0 / (m * n) as f64;

    let mut gradient = Array1::zeros(trainable.len());
    for (p, spike_grads) in gen_spike_grads.iter().enumerate() {
        let d_loss_d_sig = sum_gen
            .add(&gen_features[p].scale(-1.0))
            .scale(coeff_gen)
            .add(&sum_data.scale(-coeff_cross));
        for spike in spike_grads {
            let sensitivity = d_loss_d_sig.inner(&spike.d_sig);
            if sensitivity == 0.0 {
                continue;
            }
            let tau_row = &tau_grads[p][observed[spike.neuron]][spike.index];
            match trainable {
                Trainable::InitialCoords(coords) => {
                    for (out, coord) in coords.iter().enumerate() {
                        gradient[out] += sensitivity * tau_row[*coord];
                    }
                }
                Trainable::Weights(pairs) => {
                    for out in 0..pairs.len() {
                        gradient[out] += sensitivity * tau_row[system.param_index(out)];
                    }
                }
            }
        }
    }

    Ok(LossReport { loss, gradient, generated })
}
