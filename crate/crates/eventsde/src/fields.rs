//! Drift and diffusion vector fields with optional analytic Jacobians.

use ndarray::{Array1, Array2};

pub type DriftFn = dyn Fn(&Array1<f64>) -> Array1<f64> + Send + Sync;
pub type DiffusionFn = dyn Fn(&Array1<f64>) -> Array2<f64> + Send + Sync;
pub type DriftJacFn = dyn Fn(&Array1<f64>) -> Array2<f64> + Send + Sync;
pub type DiffusionJacFn = dyn Fn(&Array1<f64>) -> Vec<Array2<f64>> + Send + Sync;

/// Drift mu: R^e -> R^e and diffusion sigma: R^e -> R^{e x d}.
///
/// Jacobians may be supplied analytically; otherwise central finite
/// differences with step h = 1e-6 (1 + |y|) are used. The diffusion Jacobian
/// is reported per noise column: element m is the e x e matrix of partial
/// derivatives of sigma's m-th column.
pub struct VectorFields {
    dim: usize,
    noise_dim: usize,
    drift: Box<DriftFn>,
    diffusion: Box<DiffusionFn>,
    drift_jac: Option<Box<DriftJacFn>>,
    diffusion_jac: Option<Box<DiffusionJacFn>>,
}

impl VectorFields {
    pub fn new(
        dim: usize,
        noise_dim: usize,
        drift: Box<DriftFn>,
        diffusion: Box<DiffusionFn>,
    ) -> Self {
        Self { dim, noise_dim, drift, diffusion, drift_jac: None, diffusion_jac: None }
    }

    /// Convenience constructor for sigma == 0 systems.
    pub fn deterministic(dim: usize, drift: Box<DriftFn>) -> Self {
        let d = dim;
        Self::new(dim, 1, drift, Box::new(move |_y| Array2::zeros((d, 1))))
            .with_diffusion_jacobian(Box::new(move |_y| vec![Array2::zeros((d, d))]))
    }

    pub fn with_drift_jacobian(mut self, jac: Box<DriftJacFn>) -> Self {
        self.drift_jac = Some(jac);
        self
    }

    pub fn with_diffusion_jacobian(mut self, jac: Box<DiffusionJacFn>) -> Self {
        self.diffusion_jac = Some(jac);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn drift(&self, y: &Array1<f64>) -> Array1<f64> {
        (self.drift)(y)
    }

    pub fn diffusion(&self, y: &Array1<f64>) -> Array2<f64> {
        (self.diffusion)(y)
    }

    pub fn has_analytic_drift_jacobian(&self) -> bool {
        self.drift_jac.is_some()
    }

    pub fn drift_jacobian(&self, y: &Array1<f64>) -> Array2<f64> {
        match &self.drift_jac {
            Some(jac) => jac(y),
            None => self.drift_jacobian_numeric(y),
        }
    }

    pub fn diffusion_jacobian(&self, y: &Array1<f64>) -> Vec<Array2<f64>> {
        match &self.diffusion_jac {
            Some(jac) => jac(y),
            None => self.diffusion_jacobian_numeric(y),
        }
    }

    pub fn drift_jacobian_numeric(&self, y: &Array1<f64>) -> Array2<f64> {
        let h = fd_step(y);
        let mut out = Array2::zeros((self.dim, self.dim));
        for i in 0..self.dim {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[i] += h;
            ym[i] -= h;
            let col = ((self.drift)(&yp) - (self.drift)(&ym)) / (2.0 * h);
            out.column_mut(i).assign(&col);
        }
        out
    }

    pub fn diffusion_jacobian_numeric(&self, y: &Array1<f64>) -> Vec<Array2<f64>> {
        let h = fd_step(y);
        let mut out = vec![Array2::zeros((self.dim, self.dim)); self.noise_dim];
        for i in 0..self.dim {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[i] += h;
            ym[i] -= h;
            let diff = ((self.diffusion)(&yp) - (self.diffusion)(&ym)) / (2.0 * h);
            for m in 0..self.noise_dim {
                for r in 0..self.dim {
                    out[m][[r, i]] = diff[[r, m]];
                }
            }
        }
        out
    }
}

pub(crate) fn fd_step(y: &Array1<f64>) -> f64 {
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    1e-6 * (1.0 + norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn cubic_fields() -> VectorFields {
        VectorFields::new(
            2,
            1,
            Box::new(|y: &Array1<f64>| array![y[0] * y[0] * y[1], -y[1] + y[0]]),
            Box::new(|y: &Array1<f64>| {
                Array2::from_shape_vec((2, 1), vec![y[0] * y[1], y[1] * y[1]]).unwrap()
            }),
        )
        .with_drift_jacobian(Box::new(|y: &Array1<f64>| {
            array![[2.0 * y[0] * y[1], y[0] * y[0]], [1.0, -1.0]]
        }))
        .with_diffusion_jacobian(Box::new(|y: &Array1<f64>| {
            vec![array![[y[1], y[0]], [0.0, 2.0 * y[1]]]]
        }))
    }

    #[test]
    fn analytic_and_numeric_jacobians_agree() {
        let f = cubic_fields();
        let y = array![0.7, -1.3];
        let a = f.drift_jacobian(&y);
        let n = f.drift_jacobian_numeric(&y);
        for i in 0..2 {
            for j in 0..2 {
                let denom = a[[i, j]].abs().max(1.0);
                assert!((a[[i, j]] - n[[i, j]]).abs() / denom < 1e-4);
            }
        }
        let da = f.diffusion_jacobian(&y);
        let dn = f.diffusion_jacobian_numeric(&y);
        for i in 0..2 {
            for j in 0..2 {
                let denom = da[0][[i, j]].abs().max(1.0);
                assert!((da[0][[i, j]] - dn[0][[i, j]]).abs() / denom < 1e-4);
            }
        }
    }

    #[test]
    fn deterministic_constructor_has_zero_diffusion() {
        let f = VectorFields::deterministic(3, Box::new(|y: &Array1<f64>| -y.clone()));
        let y = array![1.0, 2.0, 3.0];
        assert_eq!(f.diffusion(&y), Array2::zeros((3, 1)));
        assert_eq!(f.diffusion_jacobian(&y)[0], Array2::zeros((3, 3)));
    }
}
