//! Cadlag paths, Marcus interpolation, and time augmentation.

use crate::error::{Error, Result};

/// A cadlag path stored as nodes. A jump at time t is encoded as two nodes
/// with the same time stamp: the left limit first, the post-jump value second.
#[derive(Debug, Clone, PartialEq)]
pub struct CadlagPath {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub dim: usize,
}

impl CadlagPath {
    pub fn from_nodes(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidArgument(
                "a path needs matching, nonempty time and value lists".into(),
            ));
        }
        let dim = values[0].len();
        if dim == 0 {
            return Err(Error::InvalidArgument("path values must have a positive dimension".into()));
        }
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch("path nodes have mixed dimensions".into()));
        }
        let mut run = 1;
        for w in times.windows(2) {
            if w[1] < w[0] {
                return Err(Error::InvalidArgument("path times must be nondecreasing".into()));
            }
            run = if w[1] == w[0] { run + 1 } else { 1 };
            if run > 2 {
                return Err(Error::InvalidArgument(
                    "at most two nodes (left limit, post-jump value) may share a time".into(),
                ));
            }
        }
        Ok(Self { times, values, dim })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }
}

/// A continuous piecewise-linear path. `clock` carries the original (pre
/// interpolation) time of each node, so fictitious jump time is visible as a
/// flat clock; hand-built paths just use `times` as their clock.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub clock: Vec<f64>,
    /// Index of the cadlag node each output node came from.
    pub origin: Vec<usize>,
    pub dim: usize,
}

impl PiecewiseLinear {
    pub fn from_nodes(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidArgument(
                "a path needs matching, nonempty time and value lists".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) && times.len() > 1 {
            return Err(Error::InvalidArgument(
                "piecewise-linear node times must be strictly increasing".into(),
            ));
        }
        let dim = values[0].len();
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch("path nodes have mixed dimensions".into()));
        }
        let clock = times.clone();
        let origin = (0..times.len()).collect();
        Ok(Self { times, values, clock, origin, dim })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Increment of segment s (between nodes s and s + 1).
    pub fn increment(&self, s: usize) -> Vec<f64> {
        (0..self.dim).map(|c| self.values[s + 1][c] - self.values[s][c]).collect()
    }

    pub fn n_segments(&self) -> usize {
        self.len().saturating_sub(1)
    }
}

/// Builds the K-dimensional counting path of a spike-train batch member:
/// coordinate k jumps by one at every spike of neuron k.
pub fn spikes_to_path(trains: &[Vec<f64>], t_end: f64) -> Result<CadlagPath> {
    Ok(spikes_to_path_indexed(trains, t_end)?.0)
}

/// As `spikes_to_path`, also reporting for every spike the node pair
/// (left limit, post jump) it produced.
pub(crate) fn spikes_to_path_indexed(
    trains: &[Vec<f64>],
    t_end: f64,
) -> Result<(CadlagPath, Vec<Vec<(usize, usize)>>)> {
    if trains.is_empty() {
        return Err(Error::InvalidArgument("at least one neuron is required".into()));
    }
    if !(t_end > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {t_end}")));
    }
    let dim = trains.len();
    let mut spikes: Vec<(f64, usize, usize)> = Vec::new();
    for (neuron, train) in trains.iter().enumerate() {
        for (idx, t) in train.iter().enumerate() {
            if !(*t >= 0.0 && *t <= t_end) {
                return Err(Error::InvalidArgument(format!(
                    "spike at {t} outside [0, {t_end}]"
                )));
            }
            spikes.push((*t, neuron, idx));
        }
    }
    spikes.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut times = Vec::with_capacity(2 * spikes.len() + 2);
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(2 * spikes.len() + 2);
    let mut pairs = vec![Vec::new(); dim];
    let mut counts = vec![0.0; dim];
    times.push(0.0);
    values.push(counts.clone());

    let mut s = 0;
    while s < spikes.len() {
        let t = spikes[s].0;
        // left limit (reuse the initial node for jumps at exactly t = 0)
        let left = if t == 0.0 && times.len() == 1 {
            0
        } else {
            times.push(t);
            values.push(counts.clone());
            times.len() - 1
        };
        let mut group = s;
        while group < spikes.len() && spikes[group].0 == t {
            counts[spikes[group].1] += 1.0;
            group += 1;
        }
        times.push(t);
        values.push(counts.clone());
        let right = times.len() - 1;
        for member in &spikes[s..group] {
            pairs[member.1].push((left, right));
        }
        // spikes within a group are recorded in neuron order; restore each
        // neuron's own spike order
        s = group;
    }
    if *times.last().unwrap() < t_end {
        times.push(t_end);
        values.push(counts.clone());
    }
    // pairs were pushed in global time order, which preserves each neuron's
    // own chronological order because trains are per-neuron sorted on entry
    let path = CadlagPath::from_nodes(times, values)?;
    Ok((path, pairs))
}

/// Replaces every jump by a linear traversal over fictitious time and
/// reparameterizes back to the original span. Budgets are proportional to
/// jump size with a total of one tenth of the span; the signature of the
/// result does not depend on that choice.
pub fn marcus_interpolate(path: &CadlagPath) -> PiecewiseLinear {
    let n = path.len();
    let span = (path.t_end() - path.t_start()).max(f64::MIN_POSITIVE);
    let mut jump_sizes = Vec::new();
    for j in 0..n.saturating_sub(1) {
        if path.times[j + 1] == path.times[j] {
            let size: f64 = (0..path.dim)
                .map(|c| (path.values[j + 1][c] - path.values[j][c]).powi(2))
                .sum::<f64>()
                .sqrt();
            jump_sizes.push(size);
        }
    }
    let total_size: f64 = jump_sizes.iter().sum();
    let r_total = span / 10.0;

    let mut times = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut clock = Vec::with_capacity(n);
    let mut origin = Vec::with_capacity(n);
    let mut offset = 0.0;
    let mut jump_index = 0;
    for j in 0..n {
        if j > 0 && path.times[j] == path.times[j - 1] {
            // post-jump node: land after this jump's fictitious budget
            let size = jump_sizes[jump_index];
            jump_index += 1;
            if size == 0.0 {
                continue; // degenerate jump, drop the duplicate node
            }
            let budget = if total_size > 0.0 { r_total * size / total_size } else { 0.0 };
            offset += budget;
        }
        times.push(path.times[j] + offset);
        values.push(path.values[j].clone());
        clock.push(path.times[j]);
        origin.push(j);
    }
    // rescale the parameter back to the original span
    let used = offset;
    if used > 0.0 {
        let scale = span / (span + used);
        let t0 = path.t_start();
        for t in &mut times {
            *t = t0 + (*t - t0) * scale;
        }
    }
    PiecewiseLinear { times, values, clock, origin, dim: path.dim }
}

/// Appends the original clock as an extra coordinate. Fictitious Marcus time
/// is flat in this coordinate, the genuine time advances linearly.
pub fn time_augment(path: &PiecewiseLinear) -> PiecewiseLinear {
    let values = path
        .values
        .iter()
        .zip(&path.clock)
        .map(|(v, c)| {
            let mut out = v.clone();
            out.push(*c);
            out
        })
        .collect();
    PiecewiseLinear {
        times: path.times.clone(),
        values,
        clock: path.clock.clone(),
        origin: path.origin.clone(),
        dim: path.dim + 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting_path_shapes() {
        // no spikes: constant zero path with the two boundary nodes
        let p = spikes_to_path(&[vec![]], 1.0).unwrap();
        assert_eq!(p.times, vec![0.0, 1.0]);
        assert_eq!(p.values, vec![vec![0.0], vec![0.0]]);

        // one spike: (0,0), (t,0), (t,1), (T,1)
        let p = spikes_to_path(&[vec![0.3]], 1.0).unwrap();
        assert_eq!(p.times, vec![0.0, 0.3, 0.3, 1.0]);
        assert_eq!(p.values, vec![vec![0.0], vec![0.0], vec![1.0], vec![1.0]]);

        // interleaved spikes across two neurons give a monotone staircase
        let p = spikes_to_path(&[vec![0.2, 0.6], vec![0.4]], 1.0).unwrap();
        for w in p.values.windows(2) {
            assert!(w[1][0] >= w[0][0] && w[1][1] >= w[0][1]);
        }
        assert_eq!(p.values.last().unwrap(), &vec![2.0, 1.0]);

        // spikes outside the horizon are rejected
        assert!(spikes_to_path(&[vec![1.4]], 1.0).is_err());
    }

    #[test]
    fn continuous_paths_are_untouched_by_marcus() {
        let path = CadlagPath::from_nodes(
            vec![0.0, 0.4, 1.0],
            vec![vec![0.0, 1.0], vec![0.5, 0.2], vec![-1.0, 0.0]],
        )
        .unwrap();
        let pl = marcus_interpolate(&path);
        assert_eq!(pl.times, path.times);
        assert_eq!(pl.values, path.values);
        assert_eq!(pl.clock, path.times);
    }

    #[test]
    fn single_jump_becomes_a_segment_with_flat_clock() {
        let path = spikes_to_path(&[vec![0.5]], 1.0).unwrap();
        let pl = marcus_interpolate(&path);
        assert_eq!(pl.len(), 4);
        // strictly increasing parameter, clock flat across the jump
        for w in pl.times.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert_eq!(pl.clock, vec![0.0, 0.5, 0.5, 1.0]);
        assert_eq!(pl.times.last().copied(), Some(1.0));
    }

    #[test]
    fn time_augmentation_appends_the_clock() {
        let path = spikes_to_path(&[vec![0.5]], 1.0).unwrap();
        let aug = time_augment(&marcus_interpolate(&path));
        assert_eq!(aug.dim, 2);
        for (v, c) in aug.values.iter().zip(&aug.clock) {
            assert_eq!(v[1], *c);
        }
        // constant path: augmentation is the pure time segment
        let constant = CadlagPath::from_nodes(vec![0.0, 1.0], vec![vec![0.0], vec![0.0]]).unwrap();
        let aug = time_augment(&marcus_interpolate(&constant));
        assert_eq!(aug.values, vec![vec![0.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn jump_pair_encoding_is_validated() {
        assert!(CadlagPath::from_nodes(
            vec![0.0, 0.5, 0.5, 0.5, 1.0],
            vec![vec![0.0]; 5],
        )
        .is_err());
        assert!(CadlagPath::from_nodes(vec![0.0, 0.4, 0.3], vec![vec![0.0]; 3]).is_err());
    }
}
