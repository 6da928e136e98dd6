//! Unbiased maximum mean discrepancy estimation and permutation testing.

use crate::error::{Error, Result};
use crate::kernel::{features_of_batch, gram_from_features, KernelConfig};
use crate::path::CadlagPath;
use crate::tensor::TruncatedSignature;

/// Unbiased estimator from precomputed feature vectors:
/// sum_{i != j} k(x_i, x_j) / (m (m-1)) - 2 sum k(x_i, y_j) / (m n)
/// + sum_{i != j} k(y_i, y_j) / (n (n-1)).
pub fn mmd_from_features(
    fx: &[TruncatedSignature],
    fy: &[TruncatedSignature],
) -> Result<f64> {
    let (m, n) = (fx.len(), fy.len());
    if m < 2 || n < 2 {
        return Err(Error::InvalidArgument(format!(
            "unbiased MMD needs at least two paths per batch, got {m} and {n}"
        )));
    }
    let mut xx = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                xx += fx[i].inner(&fx[j]);
            }
        }
    }
    let mut yy = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                yy += fy[i].inner(&fy[j]);
            }
        }
    }
    let mut xy = 0.0;
    for a in fx {
        for b in fy {
            xy += a.inner(b);
        }
    }
    Ok(xx / (m * (m - 1)) as f64 - 2.0 * xy / (m * n) as f64 + yy / (n * (n - 1)) as f64)
}

pub fn mmd_unbiased(xs: &[CadlagPath], ys: &[CadlagPath], cfg: &KernelConfig) -> Result<f64> {
    mmd_from_features(&features_of_batch(xs, cfg)?, &features_of_batch(ys, cfg)?)
}

#[derive(Debug, Clone)]
pub struct PermutationReport {
    pub mmd: f64,
    pub p_value: f64,
    pub permutations: usize,
}

fn mmd_from_gram(gram: &[Vec<f64>], index: &[usize], m: usize) -> f64 {
    let n = index.len() - m;
    let mut xx = 0.0;
    let mut yy = 0.0;
    let mut xy = 0.0;
    for (a, &ia) in index.iter().enumerate() {
        for (b, &ib) in index.iter().enumerate() {
            if a == b {
                continue;
            }
            let k = gram[ia][ib];
            match (a < m, b < m) {
                (true, true) => xx += k,
                (false, false) => yy += k,
                _ => xy += k,
            }
        }
    }
    xx / (m * (m - 1)) as f64 - xy / (m * n) as f64 + yy / (n * (n - 1)) as f64
}

/// Two-sample permutation test on the unbiased MMD. The p-value counts
/// permuted statistics at least as large as the observed one, with the
/// add-one correction.
pub fn permutation_test(
    xs: &[CadlagPath],
    ys: &[CadlagPath],
    cfg: &KernelConfig,
    permutations: usize,
    seed: u64,
) -> Result<PermutationReport> {
    let (m, n) = (xs.len(), ys.len());
    if m < 2 || n < 2 {
        return Err(Error::InvalidArgument(format!(
            "permutation test needs at least two paths per batch, got {m} and {n}"
        )));
    }
    let mut pooled = features_of_batch(xs, cfg)?;
    pooled.extend(features_of_batch(ys, cfg)?);
    let gram = gram_from_features(&pooled, &pooled);
    let identity: Vec<usize> = (0..m + n).collect();
    let observed = mmd_from_gram(&gram, &identity, m);

    let mut state = seed ^ 0x9e37_79b9_7f4a_7c15;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let mut at_least = 0usize;
    let mut index = identity;
    for _ in 0..permutations {
        for i in (1..index.len()).rev() {
            let j = (next() % (i as u64 + 1)) as usize;
            index.swap(i, j);
        }
        if mmd_from_gram(&gram, &index, m) >= observed {
            at_least += 1;
        }
    }
    Ok(PermutationReport {
        mmd: observed,
        p_value: (1 + at_least) as f64 / (1 + permutations) as f64,
        permutations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::signature_kernel;
    use crate::path::spikes_to_path;

    fn poisson_train(rate: f64, t_end: f64, seed: u64) -> Vec<f64> {
        let mut state = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
        let mut uniform = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            ((state >> 11) as f64 + 1.0) / (1u64 << 53) as f64
        };
        let mut t = 0.0;
        let mut out = Vec::new();
        loop {
            t += -uniform().ln() / rate;
            if t >= t_end {
                return out;
            }
            out.push(t);
        }
    }

    #[test]
    fn identical_batches_cancel_to_zero() {
        // k(z,z) - 2 k(z,z) + k(z,z): exact cancellation up to the rounding
        // of the three block sums
        let z = spikes_to_path(&[vec![0.2, 0.8]], 1.0).unwrap();
        let batch = vec![z.clone(), z.clone(), z.clone()];
        let cfg = KernelConfig::default();
        let scale = signature_kernel(&z, &z, &cfg).unwrap();
        let mmd = mmd_unbiased(&batch, &batch, &cfg).unwrap();
        assert!(mmd.abs() <= 1e-12 * scale, "mmd = {mmd}");
    }

    #[test]
    fn estimator_matches_a_direct_double_loop() {
        let cfg = KernelConfig::default();
        let xs: Vec<CadlagPath> = (0..5)
            .map(|s| spikes_to_path(&[poisson_train(3.0, 1.0, 10 + s)], 1.0).unwrap())
            .collect();
        let ys = xs.clone();
        let m = xs.len();
        let fx = features_of_batch(&xs, &cfg).unwrap();
        // X = Y as sets: value reduces to the degenerate combination of the
        // within-batch sums and the diagonal
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..m {
            diag += fx[i].inner(&fx[i]);
            for j in 0..m {
                if i != j {
                    off += fx[i].inner(&fx[j]);
                }
            }
        }
        let expected = (2.0 / (m * (m - 1)) as f64 - 2.0 / (m * m) as f64) * off
            - 2.0 / (m * m) as f64 * diag;
        let mmd = mmd_unbiased(&xs, &ys, &cfg).unwrap();
        assert!((mmd - expected).abs() < 1e-12, "{mmd} vs {expected}");
    }

    #[test]
    fn batch_size_below_two_is_rejected() {
        let z = spikes_to_path(&[vec![0.2]], 1.0).unwrap();
        let cfg = KernelConfig::default();
        assert!(mmd_unbiased(&[z.clone()], &[z.clone(), z.clone()], &cfg).is_err());
    }

    #[test]
    fn permutation_test_separates_distinct_rates() {
        let cfg = KernelConfig::default();
        let xs: Vec<CadlagPath> = (0..24)
            .map(|s| spikes_to_path(&[poisson_train(0.5, 1.0, 100 + s)], 1.0).unwrap())
            .collect();
        let ys: Vec<CadlagPath> = (0..24)
            .map(|s| spikes_to_path(&[poisson_train(5.0, 1.0, 900 + s)], 1.0).unwrap())
            .collect();
        let report = permutation_test(&xs, &ys, &cfg, 199, 7).unwrap();
        assert!(report.p_value <= 0.01, "p = {}", report.p_value);
        assert!(report.mmd > 0.0);

        // identical sets: the observed statistic sits in the bulk
        let same = permutation_test(&xs, &xs, &cfg, 199, 8).unwrap();
        assert!(same.p_value >= 0.5, "p = {}", same.p_value);
    }
}
