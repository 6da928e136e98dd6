//! Signature kernels: graded inner products of (optionally normalized,
//! time-augmented) Marcus signatures.

use crate::error::{Error, Result};
use crate::path::{marcus_interpolate, time_augment, CadlagPath};
use crate::tensor::{robust_normalize, truncated_signature, TruncatedSignature};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    None,
    Robust(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub depth: usize,
    pub normalization: Normalization,
    pub time_augment: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { depth: 3, normalization: Normalization::None, time_augment: true }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::InvalidArgument("kernel depth must be at least 1".into()));
        }
        if let Normalization::Robust(r) = self.normalization {
            if !(r > 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "robust normalization needs R > 1, got {r}"
                )));
            }
        }
        Ok(())
    }
}

/// Feature map of one path: Marcus interpolation, optional time augmentation,
/// truncated signature, optional tensor normalization.
pub fn signature_features(path: &CadlagPath, cfg: &KernelConfig) -> Result<TruncatedSignature> {
    cfg.validate()?;
    let pl = marcus_interpolate(path);
    let pl = if cfg.time_augment { time_augment(&pl) } else { pl };
    let sig = truncated_signature(&pl, cfg.depth)?;
    match cfg.normalization {
        Normalization::None => Ok(sig),
        Normalization::Robust(r) => robust_normalize(&sig, r),
    }
}

pub fn signature_kernel(x: &CadlagPath, y: &CadlagPath, cfg: &KernelConfig) -> Result<f64> {
    if x.dim != y.dim {
        return Err(Error::DimensionMismatch(format!(
            "kernel arguments have dimensions {} and {}",
            x.dim, y.dim
        )));
    }
    Ok(signature_features(x, cfg)?.inner(&signature_features(y, cfg)?))
}

pub fn features_of_batch(
    paths: &[CadlagPath],
    cfg: &KernelConfig,
) -> Result<Vec<TruncatedSignature>> {
    paths.iter().map(|p| signature_features(p, cfg)).collect()
}

pub fn gram_from_features(fx: &[TruncatedSignature], fy: &[TruncatedSignature]) -> Vec<Vec<f64>> {
    fx.iter().map(|a| fy.iter().map(|b| a.inner(b)).collect()).collect()
}

pub fn gram_matrix(
    xs: &[CadlagPath],
    ys: &[CadlagPath],
    cfg: &KernelConfig,
) -> Result<Vec<Vec<f64>>> {
    Ok(gram_from_features(&features_of_batch(xs, cfg)?, &features_of_batch(ys, cfg)?))
}

/// Smallest eigenvalue of a symmetric matrix by cyclic Jacobi sweeps.
pub fn sym_min_eigenvalue(matrix: &[Vec<f64>]) -> f64 {
    let n = matrix.len();
    if n == 0 {
        return 0.0;
    }
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off = f64::max(off, a[p][q].abs());
            }
        }
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::spikes_to_path;

    #[test]
    fn kernel_of_linear_paths_matches_hand_computation() {
        // 1-d linear paths with increments a and b, no time augmentation,
        // depth 2: k = (1, a, a^2/2) . (1, b, b^2/2) = 1 + ab + (ab)^2 / 4
        let make = |inc: f64| {
            CadlagPath::from_nodes(vec![0.0, 1.0], vec![vec![0.0], vec![inc]]).unwrap()
        };
        let cfg = KernelConfig { depth: 2, normalization: Normalization::None, time_augment: false };
        let (a, b) = (0.7, -1.3);
        let k = signature_kernel(&make(a), &make(b), &cfg).unwrap();
        assert!((k - (1.0 + a * b + (a * b) * (a * b) / 4.0)).abs() < 1e-14);
    }

    #[test]
    fn kernel_is_symmetric_and_at_least_one_on_the_diagonal() {
        let cfg = KernelConfig::default();
        let x = spikes_to_path(&[vec![0.2, 0.7]], 1.0).unwrap();
        let y = spikes_to_path(&[vec![0.5]], 1.0).unwrap();
        let kxy = signature_kernel(&x, &y, &cfg).unwrap();
        let kyx = signature_kernel(&y, &x, &cfg).unwrap();
        assert!((kxy - kyx).abs() < 1e-12);
        assert!(signature_kernel(&x, &x, &cfg).unwrap() >= 1.0);
    }

    #[test]
    fn distinct_spike_trains_have_distinct_augmented_signatures() {
        // spike at 0.3 vs 0.5: the depth-2 cross integrals (x then time,
        // time then x) are (T - t, t), so they must differ by exactly 0.2
        let cfg = KernelConfig { depth: 2, ..Default::default() };
        let a = signature_features(&spikes_to_path(&[vec![0.3]], 1.0).unwrap(), &cfg).unwrap();
        let b = signature_features(&spikes_to_path(&[vec![0.5]], 1.0).unwrap(), &cfg).unwrap();
        // coordinate order (x, time): entry [0][1] is the x-then-time integral
        assert!((a.levels[1][1] - 0.7).abs() < 1e-12);
        assert!((b.levels[1][1] - 0.5).abs() < 1e-12);
        assert!((a.levels[1][2] - 0.3).abs() < 1e-12);
        assert!((b.levels[1][2] - 0.5).abs() < 1e-12);
        // identical trains agree exactly
        let c = signature_features(&spikes_to_path(&[vec![0.3]], 1.0).unwrap(), &cfg).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn jacobi_eigenvalues_on_a_known_matrix() {
        // eigenvalues of [[2,1],[1,2]] are 1 and 3
        let min = sym_min_eigenvalue(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        assert!((min - 1.0).abs() < 1e-12);
        let psd = sym_min_eigenvalue(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(psd.abs() < 1e-12);
    }

    #[test]
    fn gram_of_spike_trains_is_positive_semidefinite() {
        let mut state = 123u64;
        let mut uniform = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut batch = Vec::new();
        for _ in 0..16 {
            let mut spikes: Vec<f64> = (0..4).map(|_| uniform()).collect();
            spikes.sort_by(f64::total_cmp);
            batch.push(spikes_to_path(&[spikes], 1.0).unwrap());
        }
        let cfg = KernelConfig::default();
        let gram = gram_matrix(&batch, &batch, &cfg).unwrap();
        assert!(sym_min_eigenvalue(&gram) >= -1e-10);
    }
}
