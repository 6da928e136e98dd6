//! Seeded Brownian paths on a fine grid with piecewise-linear interpolation.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::rng::standard_normal;

/// A d-dimensional Brownian path sampled once on a fine grid.
///
/// Increments over grid cells are independent N(0, dt I) draws keyed by
/// (seed, node index); between nodes the path is interpolated linearly. The
/// interpolation is treated as having zero time-derivative by all gradient
/// computations in this crate.
#[derive(Debug, Clone)]
pub struct BrownianDriver {
    dim: usize,
    t0: f64,
    t1: f64,
    resolution: f64,
    seed: u64,
    times: Vec<f64>,
    values: Array2<f64>,
}

/// Samples a driver covering [t0, t1] with roughly `resolution`-sized cells.
///
/// The grid has ceil((t1 - t0) / resolution) + 1 nodes; the last node lands
/// exactly on t1. Identical arguments give bit-identical paths.
pub fn sample_driver(
    dim: usize,
    t0: f64,
    t1: f64,
    resolution: f64,
    seed: u64,
) -> Result<BrownianDriver> {
    if dim == 0 {
        return Err(Error::InvalidArgument("driver dimension must be positive".into()));
    }
    if !(t0 < t1) {
        return Err(Error::InvalidArgument(format!(
            "driver span must satisfy t0 < t1, got [{t0}, {t1}]"
        )));
    }
    if !(resolution > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "driver resolution must be positive, got {resolution}"
        )));
    }
    let span = t1 - t0;
    let cells = ((span / resolution) - 1e-9).ceil().max(1.0) as usize;
    let mut times = Vec::with_capacity(cells + 1);
    for k in 0..=cells {
        let t = t0 + (k as f64) * resolution;
        times.push(if k == cells { t1 } else { t.min(t1) });
    }
    let mut values = Array2::zeros((cells + 1, dim));
    for k in 1..=cells {
        let dt = times[k] - times[k - 1];
        let scale = dt.sqrt();
        for j in 0..dim {
            let z = standard_normal(seed, k as u64, j as u64);
            values[[k, j]] = values[[k - 1, j]] + scale * z;
        }
    }
    Ok(BrownianDriver { dim, t0, t1, resolution, seed, times, values })
}

impl BrownianDriver {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn contains(&self, t: f64) -> bool {
        let slack = self.slack();
        t >= self.t0 - slack && t <= self.t1 + slack
    }

    fn slack(&self) -> f64 {
        1e-9 * (self.t1 - self.t0).max(1.0)
    }

    /// Linear interpolation of the path at `t`; exact node values at nodes.
    pub fn evaluate(&self, t: f64) -> Result<Array1<f64>> {
        if !self.contains(t) {
            return Err(Error::OutOfSpan { t, t0: self.t0, t1: self.t1 });
        }
        let t = t.clamp(self.t0, self.t1);
        // index of the first node strictly greater than t
        let hi = self.times.partition_point(|&node| node <= t);
        if hi == self.times.len() {
            return Ok(self.values.row(self.times.len() - 1).to_owned());
        }
        let lo = hi - 1;
        if t == self.times[lo] {
            return Ok(self.values.row(lo).to_owned());
        }
        let width = self.times[hi] - self.times[lo];
        let theta = (t - self.times[lo]) / width;
        Ok((1.0 - theta) * &self.values.row(lo) + theta * &self.values.row(hi))
    }

    /// Increment of the interpolated path over [a, b].
    pub fn increment(&self, a: f64, b: f64) -> Result<Array1<f64>> {
        Ok(self.evaluate(b)? - self.evaluate(a)?)
    }
}
