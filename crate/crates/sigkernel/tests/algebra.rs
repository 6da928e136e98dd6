//! Algebraic invariants of the signature pipeline on randomized paths:
//! Chen's identity, reparameterization invariance, independence from the
//! Marcus fictitious-time budget, and Gram positive semidefiniteness.

use sigkernel::{
    gram_matrix, marcus_interpolate, mmd_unbiased, signature_features, spikes_to_path,
    sym_min_eigenvalue, time_augment, truncated_signature, CadlagPath, KernelConfig,
    PiecewiseLinear, TruncatedSignature,
};

struct Rng(u64);

impl Rng {
    fn uniform(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        ((self.0 >> 11) as f64 + 1.0) / (1u64 << 53) as f64
    }

    fn standard(&mut self) -> f64 {
        2.0 * self.uniform() - 1.0
    }
}

fn random_piecewise_linear(rng: &mut Rng, dim: usize, nodes: usize) -> PiecewiseLinear {
    let mut times: Vec<f64> = (0..nodes).map(|_| rng.uniform()).collect();
    times.sort_by(f64::total_cmp);
    times[0] = 0.0;
    let last = nodes - 1;
    times[last] = 1.0;
    for i in 1..nodes {
        if times[i] <= times[i - 1] {
            times[i] = times[i - 1] + 1e-6;
        }
    }
    let values = (0..nodes).map(|_| (0..dim).map(|_| rng.standard()).collect()).collect();
    PiecewiseLinear::from_nodes(times, values).unwrap()
}

fn max_level_gap(a: &TruncatedSignature, b: &TruncatedSignature) -> f64 {
    let mut gap: f64 = (a.level0 - b.level0).abs();
    for (la, lb) in a.levels.iter().zip(&b.levels) {
        for (x, y) in la.iter().zip(lb) {
            gap = gap.max((x - y).abs());
        }
    }
    gap
}

#[test]
fn signatures_are_reparameterization_invariant() {
    let mut rng = Rng(0x1234_5678_9abc_def0);
    for depth in 1..=4 {
        for trial in 0..25 {
            let path = random_piecewise_linear(&mut rng, 2, 6);
            // resample nodes under a strictly increasing time change and an
            // interior node refinement; values are interpolated exactly
            let warp = |t: f64| t * t * (3.0 - 2.0 * t); // smootherstep, increasing on [0,1]
            let mut times = Vec::new();
            let mut values = Vec::new();
            for (i, (t, v)) in path.times.iter().zip(&path.values).enumerate() {
                times.push(warp(*t));
                values.push(v.clone());
                if i + 1 < path.len() {
                    let mid = 0.5 * (path.times[i] + path.times[i + 1]);
                    let theta =
                        (mid - path.times[i]) / (path.times[i + 1] - path.times[i]);
                    let interp: Vec<f64> = (0..path.dim)
                        .map(|c| {
                            (1.0 - theta) * path.values[i][c] + theta * path.values[i + 1][c]
                        })
                        .collect();
                    times.push(warp(mid));
                    values.push(interp);
                }
            }
            let warped = PiecewiseLinear::from_nodes(times, values).unwrap();
            let sig = truncated_signature(&path, depth).unwrap();
            let resampled = truncated_signature(&warped, depth).unwrap();
            let gap = max_level_gap(&sig, &resampled);
            assert!(gap <= 1e-12, "depth {depth} trial {trial}: gap {gap}");
        }
    }
}

#[test]
fn marcus_budget_does_not_change_the_signature() {
    // two different fictitious-time budgets around the same jumps; depth 4;
    // realized by scaling all jump sizes equally (budgets are proportional),
    // plus an explicitly hand-built interpolation with a budget of the full
    // span instead of a tenth
    let mut rng = Rng(77);
    for trial in 0..20 {
        let spikes: Vec<f64> = {
            let mut s: Vec<f64> = (0..4).map(|_| rng.uniform() * 0.9 + 0.05).collect();
            s.sort_by(f64::total_cmp);
            s
        };
        let path = spikes_to_path(&[spikes], 1.0).unwrap();
        let default_budget = time_augment(&marcus_interpolate(&path));
        let sig_a = truncated_signature(&default_budget, 4).unwrap();

        // hand-built interpolation with ten times the fictitious budget
        let mut times = Vec::new();
        let mut values = Vec::new();
        let mut clock = Vec::new();
        let mut offset = 0.0;
        let budget = 1.0 / path.values.last().unwrap()[0]; // per unit jump
        for j in 0..path.len() {
            if j > 0 && path.times[j] == path.times[j - 1] {
                offset += budget;
            }
            times.push(path.times[j] + offset);
            values.push(path.values[j].clone());
            clock.push(path.times[j]);
        }
        let scale = 1.0 / (1.0 + offset);
        let times: Vec<f64> = times.into_iter().map(|t| t * scale).collect();
        let mut alt = PiecewiseLinear::from_nodes(times, values).unwrap();
        alt.clock = clock;
        let sig_b = truncated_signature(&time_augment(&alt), 4).unwrap();
        let gap = max_level_gap(&sig_a, &sig_b);
        assert!(gap <= 1e-12, "trial {trial}: gap {gap}");
    }
}

#[test]
fn chen_identity_on_random_paths_at_all_depths() {
    let mut rng = Rng(9001);
    for depth in 1..=4 {
        for _ in 0..25 {
            let path = random_piecewise_linear(&mut rng, 3, 7);
            let split = 3;
            let first = PiecewiseLinear::from_nodes(
                path.times[..=split].to_vec(),
                path.values[..=split].to_vec(),
            )
            .unwrap();
            let second = PiecewiseLinear::from_nodes(
                path.times[split..].to_vec(),
                path.values[split..].to_vec(),
            )
            .unwrap();
            let glued = truncated_signature(&first, depth)
                .unwrap()
                .mul(&truncated_signature(&second, depth).unwrap());
            let direct = truncated_signature(&path, depth).unwrap();
            assert!(max_level_gap(&direct, &glued) <= 1e-12);
        }
    }
}

#[test]
fn gram_matrices_of_spike_batches_are_psd_at_batch_32() {
    let mut rng = Rng(0xfeed);
    let mut batch = Vec::new();
    for _ in 0..32 {
        let mut trains = Vec::new();
        for _ in 0..2 {
            let n = 1 + (rng.uniform() * 4.0) as usize;
            let mut spikes: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
            spikes.sort_by(f64::total_cmp);
            trains.push(spikes);
        }
        batch.push(spikes_to_path(&trains, 1.0).unwrap());
    }
    let cfg = KernelConfig::default();
    let gram = gram_matrix(&batch, &batch, &cfg).unwrap();
    let min_eig = sym_min_eigenvalue(&gram);
    assert!(min_eig >= -1e-10, "min eigenvalue {min_eig}");
}

#[test]
fn normalization_keeps_kernel_rankings_for_small_paths() {
    // inputs already below the bound pass through, so score orderings
    // against a fixed reference are unchanged
    let cfg_plain = KernelConfig::default();
    let cfg_robust = KernelConfig {
        normalization: sigkernel::Normalization::Robust(50.0),
        ..Default::default()
    };
    let reference = spikes_to_path(&[vec![0.5]], 1.0).unwrap();
    let candidates: Vec<CadlagPath> = [vec![0.45], vec![0.2], vec![0.8, 0.9]]
        .into_iter()
        .map(|t| spikes_to_path(&[t], 1.0).unwrap())
        .collect();
    let score = |cfg: &KernelConfig| -> Vec<f64> {
        let fr = signature_features(&reference, cfg).unwrap();
        candidates
            .iter()
            .map(|c| signature_features(c, cfg).unwrap().inner(&fr))
            .collect()
    };
    let plain = score(&cfg_plain);
    let robust = score(&cfg_robust);
    let argmax = |v: &[f64]| {
        v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap()
    };
    assert_eq!(argmax(&plain), argmax(&robust));
    for (a, b) in plain.iter().zip(&robust) {
        assert_eq!(a, b, "below the bound the normalization is the identity");
    }
}

#[test]
fn null_mmd_is_centered_at_zero() {
    // same-distribution batch pairs: the unbiased estimator averages to zero
    let mut rng = Rng(2024);
    let mut poisson = |rate: f64| {
        let mut t = 0.0;
        let mut out = Vec::new();
        loop {
            t += -rng.uniform().ln() / rate;
            if t >= 1.0 {
                return out;
            }
            out.push(t);
        }
    };
    let cfg = KernelConfig::default();
    let pairs = 60;
    let batch = 16;
    let mut values = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let xs: Vec<CadlagPath> =
            (0..batch).map(|_| spikes_to_path(&[poisson(2.0)], 1.0).unwrap()).collect();
        let ys: Vec<CadlagPath> =
            (0..batch).map(|_| spikes_to_path(&[poisson(2.0)], 1.0).unwrap()).collect();
        values.push(mmd_unbiased(&xs, &ys, &cfg).unwrap());
    }
    let mean = values.iter().sum::<f64>() / pairs as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (pairs - 1) as f64;
    let se = (var / pairs as f64).sqrt();
    assert!(mean.abs() <= 3.0 * se, "null mean {mean} (se {se})");
}
