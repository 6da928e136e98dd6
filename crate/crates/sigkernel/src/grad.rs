//! Exact signature gradients with respect to spike times.
//!
//! A spike time enters the time-augmented Marcus path only through the clock
//! coordinate of its two jump nodes, so the signature's derivative is a sum
//! of two segment terms. Each term is prefix x d(exp) x suffix in the tensor
//! algebra, with the segment exponentials shared across all spikes of the
//! path.

use crate::error::{Error, Result};
use crate::kernel::{KernelConfig, Normalization};
use crate::path::{marcus_interpolate, spikes_to_path_indexed, time_augment};
use crate::tensor::TruncatedSignature;

/// Derivative of a path's signature with respect to one spike time.
#[derive(Debug, Clone)]
pub struct SpikeGradient {
    pub neuron: usize,
    /// Position within the neuron's chronologically ordered train.
    pub index: usize,
    pub time: f64,
    pub d_sig: TruncatedSignature,
}

/// Signature of the spike-train path plus its derivative with respect to
/// every spike time. Requires the linear feature map: time augmentation on
/// and no normalization (the training default).
pub fn spike_signature_gradients(
    trains: &[Vec<f64>],
    t_end: f64,
    cfg: &KernelConfig,
) -> Result<(TruncatedSignature, Vec<SpikeGradient>)> {
    cfg.validate()?;
    if !cfg.time_augment {
        return Err(Error::InvalidArgument(
            "spike-time gradients need the time-augmented kernel (the plain signature of a counting path is reparameterization-invariant)"
                .into(),
        ));
    }
    if cfg.normalization != Normalization::None {
        return Err(Error::InvalidArgument(
            "spike-time gradients are implemented for the unnormalized kernel".into(),
        ));
    }
    for train in trains {
        if train.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("spike trains must be chronological".into()));
        }
    }

    let (path, pairs) = spikes_to_path_indexed(trains, t_end)?;
    let aug = time_augment(&marcus_interpolate(&path));
    let m = aug.n_segments();
    let time_coord = aug.dim - 1;

    // input node -> output node
    let mut inverse = vec![usize::MAX; path.len()];
    for (out, origin) in aug.origin.iter().enumerate() {
        inverse[*origin] = out;
    }

    let exps: Vec<TruncatedSignature> = (0..m)
        .map(|s| TruncatedSignature::exp(&aug.increment(s), cfg.depth))
        .collect::<Result<_>>()?;
    // prefix[s] = E_0 ... E_{s-1}, suffix[s] = E_s ... E_{m-1}
    let mut prefix = Vec::with_capacity(m + 1);
    prefix.push(TruncatedSignature::identity(aug.dim, cfg.depth)?);
    for e in &exps {
        prefix.push(prefix.last().unwrap().mul(e));
    }
    let mut suffix = vec![TruncatedSignature::identity(aug.dim, cfg.depth)?; m + 1];
    for s in (0..m).rev() {
        suffix[s] = exps[s].mul(&suffix[s + 1]);
    }
    let signature = prefix[m].clone();

    let mut e_time = vec![0.0; aug.dim];
    e_time[time_coord] = 1.0;
    let neg_e_time: Vec<f64> = e_time.iter().map(|v| -v).collect();

    let mut gradients = Vec::new();
    for (neuron, neuron_pairs) in pairs.iter().enumerate() {
        for (index, (left_in, right_in)) in neuron_pairs.iter().enumerate() {
            let out_left = inverse[*left_in];
            let out_right = inverse[*right_in];
            debug_assert_eq!(out_right, out_left + 1, "unit jumps never degenerate");
            let mut d_sig = TruncatedSignature::zero(aug.dim, cfg.depth)?;
            // segment ending at the left jump node
            if out_left > 0 {
                let s = out_left - 1;
                let de = TruncatedSignature::exp_directional(&aug.increment(s), &e_time, cfg.depth)?;
                d_sig = d_sig.add(&prefix[s].mul(&de).mul(&suffix[s + 1]));
            }
            // segment starting at the right jump node
            if out_right < m {
                let s = out_right;
                let de =
                    TruncatedSignature::exp_directional(&aug.increment(s), &neg_e_time, cfg.depth)?;
                d_sig = d_sig.add(&prefix[s].mul(&de).mul(&suffix[s + 1]));
            }
            gradients.push(SpikeGradient {
                neuron,
                index,
                time: aug.clock[out_left],
                d_sig,
            });
        }
    }
    Ok((signature, gradients))
}
