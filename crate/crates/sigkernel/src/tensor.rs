//! Graded tensor algebra truncated at a fixed depth.

use crate::error::{Error, Result};
use crate::path::PiecewiseLinear;

/// Total tensor entries allowed across levels (d + d^2 + ... + d^M).
const CAPACITY: usize = 10_000_000;

/// Levels 1..=depth of a truncated tensor-algebra element; `level0` is the
/// scalar component (1 for signatures, 0 for their directional derivatives).
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSignature {
    pub dim: usize,
    pub depth: usize,
    pub level0: f64,
    pub levels: Vec<Vec<f64>>,
}

fn level_sizes(dim: usize, depth: usize) -> Result<Vec<usize>> {
    let mut sizes = Vec::with_capacity(depth);
    let mut total = 0usize;
    let mut size = 1usize;
    for _ in 0..depth {
        size = size.checked_mul(dim).unwrap_or(usize::MAX);
        total = total.saturating_add(size);
        if total > CAPACITY {
            return Err(Error::Capacity { dim, depth, required: total, budget: CAPACITY });
        }
        sizes.push(size);
    }
    Ok(sizes)
}

fn outer(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

fn add_scaled(target: &mut [f64], source: &[f64], w: f64) {
    for (t, s) in target.iter_mut().zip(source) {
        *t += w * s;
    }
}

impl TruncatedSignature {
    pub fn identity(dim: usize, depth: usize) -> Result<Self> {
        let sizes = level_sizes(dim, depth)?;
        Ok(Self {
            dim,
            depth,
            level0: 1.0,
            levels: sizes.into_iter().map(|s| vec![0.0; s]).collect(),
        })
    }

    pub fn zero(dim: usize, depth: usize) -> Result<Self> {
        let mut out = Self::identity(dim, depth)?;
        out.level0 = 0.0;
        Ok(out)
    }

    /// Truncated tensor exponential: level n = delta^(x n) / n!.
    pub fn exp(delta: &[f64], depth: usize) -> Result<Self> {
        let dim = delta.len();
        let mut out = Self::identity(dim, depth)?;
        let mut power: Vec<f64> = vec![1.0];
        let mut factorial = 1.0;
        for n in 1..=depth {
            power = outer(&power, delta);
            factorial *= n as f64;
            for (t, p) in out.levels[n - 1].iter_mut().zip(&power) {
                *t = p / factorial;
            }
        }
        Ok(out)
    }

    /// Directional derivative of the tensor exponential at `delta` in the
    /// direction `d_delta`.
    pub fn exp_directional(delta: &[f64], d_delta: &[f64], depth: usize) -> Result<Self> {
        let dim = delta.len();
        if d_delta.len() != dim {
            return Err(Error::DimensionMismatch("exp direction has a different dimension".into()));
        }
        let mut out = Self::zero(dim, depth)?;
        // powers of delta, level 0 as the scalar [1]
        let mut powers: Vec<Vec<f64>> = vec![vec![1.0]];
        for _ in 1..depth {
            powers.push(outer(powers.last().unwrap(), delta));
        }
        let mut factorial = 1.0;
        for n in 1..=depth {
            factorial *= n as f64;
            let level = &mut out.levels[n - 1];
            for p in 0..n {
                let left = outer(&powers[p], d_delta);
                let term = outer(&left, &powers[n - 1 - p]);
                add_scaled(level, &term, 1.0 / factorial);
            }
        }
        Ok(out)
    }

    /// Truncated graded product (Chen's identity for concatenation).
    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        debug_assert_eq!(self.depth, other.depth);
        let mut out = Self {
            dim: self.dim,
            depth: self.depth,
            level0: self.level0 * other.level0,
            levels: self.levels.iter().map(|l| vec![0.0; l.len()]).collect(),
        };
        for n in 1..=self.depth {
            let level = &mut out.levels[n - 1];
            add_scaled(level, &other.levels[n - 1], self.level0);
            add_scaled(level, &self.levels[n - 1], other.level0);
            for i in 1..n {
                let j = n - i;
                let a = &self.levels[i - 1];
                let b = &other.levels[j - 1];
                let width: usize = b.len();
                for (ia, va) in a.iter().enumerate() {
                    if *va == 0.0 {
                        continue;
                    }
                    let base = ia * width;
                    for (ib, vb) in b.iter().enumerate() {
                        level[base + ib] += va * vb;
                    }
                }
            }
        }
        out
    }

    /// Graded inner product including the scalar level.
    pub fn inner(&self, other: &Self) -> f64 {
        let mut acc = self.level0 * other.level0;
        for (a, b) in self.levels.iter().zip(&other.levels) {
            for (x, y) in a.iter().zip(b) {
                acc += x * y;
            }
        }
        acc
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    /// Rescales level n by lambda^n.
    pub fn dilate(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        let mut factor = 1.0;
        for level in &mut out.levels {
            factor *= lambda;
            for v in level {
                *v *= factor;
            }
        }
        out
    }

    pub fn scale(&self, w: f64) -> Self {
        let mut out = self.clone();
        out.level0 *= w;
        for level in &mut out.levels {
            for v in level {
                *v *= w;
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.level0 += other.level0;
        for (level, src) in out.levels.iter_mut().zip(&other.levels) {
            add_scaled(level, src, 1.0);
        }
        out
    }
}

/// Signature of a piecewise-linear path: the product over segments of the
/// tensor exponentials of their increments.
pub fn truncated_signature(path: &PiecewiseLinear, depth: usize) -> Result<TruncatedSignature> {
    if depth == 0 {
        return Err(Error::InvalidArgument("truncation depth must be at least 1".into()));
    }
    let mut sig = TruncatedSignature::identity(path.dim, depth)?;
    for s in 0..path.n_segments() {
        let delta = path.increment(s);
        if delta.iter().all(|v| *v == 0.0) {
            continue;
        }
        sig = sig.mul(&TruncatedSignature::exp(&delta, depth)?);
    }
    Ok(sig)
}

/// Norm-bounding tensor normalization: if |sig| <= R the input is returned
/// unchanged, otherwise level n is rescaled by lambda^n with lambda in (0, 1)
/// solving 1 + sum_n lambda^(2n) |a_n|^2 = R^2 (strictly increasing in
/// lambda, so bisection always brackets).
pub fn robust_normalize(sig: &TruncatedSignature, r: f64) -> Result<TruncatedSignature> {
    if !(r > 1.0) {
        return Err(Error::InvalidArgument(format!("norm bound must exceed 1, got {r}")));
    }
    let level_norms: Vec<f64> =
        sig.levels.iter().map(|l| l.iter().map(|v| v * v).sum::<f64>()).collect();
    let norm_sq = 1.0 + level_norms.iter().sum::<f64>();
    let target = r * r;
    if norm_sq <= target {
        return Ok(sig.clone());
    }
    let value = |lambda: f64| {
        let mut acc = 1.0;
        let mut factor = 1.0;
        for ln in &level_norms {
            factor *= lambda * lambda;
            acc += factor * ln;
        }
        acc - target
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if value(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo) < 1e-16 || value(0.5 * (lo + hi)).abs() <= 1e-12 {
            break;
        }
    }
    Ok(sig.dilate(0.5 * (lo + hi)))
}
