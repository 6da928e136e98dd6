//! Stepping of the inter-event dynamics.

use ndarray::Array1;

use crate::driver::BrownianDriver;
use crate::error::{Error, Result};
use crate::fields::VectorFields;

/// Integration scheme for the inter-event SDE.
///
/// `Heun` is the midpoint-corrected Stratonovich scheme; `EulerMaruyama` is
/// appropriate when the diffusion is state-independent (the Stratonovich and
/// Ito solutions coincide there).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Heun,
    EulerMaruyama,
}

/// One trajectory piece between consecutive events.
#[derive(Debug, Clone)]
pub struct PathSegment {
    pub times: Vec<f64>,
    pub states: Vec<Array1<f64>>,
}

impl PathSegment {
    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn final_state(&self) -> &Array1<f64> {
        self.states.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn check_finite(y: &Array1<f64>, t: f64, context: &str) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { t, context: context.to_string() })
    }
}

/// One step of the selected scheme from `(t, y)` to `t + dt`.
pub fn sde_step(
    y: &Array1<f64>,
    t: f64,
    dt: f64,
    fields: &VectorFields,
    driver: &BrownianDriver,
    scheme: Scheme,
) -> Result<Array1<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {dt}")));
    }
    let db = driver.increment(t, t + dt)?;
    let mu0 = fields.drift(y);
    let sig0 = fields.diffusion(y);
    check_finite(&mu0, t, "drift output")?;
    let out = match scheme {
        Scheme::EulerMaruyama => y + &(mu0.clone() * dt) + sig0.dot(&db),
        Scheme::Heun => {
            let predictor = y + &(mu0.clone() * dt) + sig0.dot(&db);
            check_finite(&predictor, t, "Heun predictor")?;
            let mu1 = fields.drift(&predictor);
            let sig1 = fields.diffusion(&predictor);
            y + &((mu0 + mu1) * (0.5 * dt)) + (sig0 + sig1).dot(&db) * 0.5
        }
    };
    check_finite(&out, t + dt, "step output")?;
    Ok(out)
}

/// Heun step (the Stratonovich scheme).
pub fn stratonovich_step(
    y: &Array1<f64>,
    t: f64,
    dt: f64,
    fields: &VectorFields,
    driver: &BrownianDriver,
) -> Result<Array1<f64>> {
    sde_step(y, t, dt, fields, driver, Scheme::Heun)
}

pub fn euler_maruyama_step(
    y: &Array1<f64>,
    t: f64,
    dt: f64,
    fields: &VectorFields,
    driver: &BrownianDriver,
) -> Result<Array1<f64>> {
    sde_step(y, t, dt, fields, driver, Scheme::EulerMaruyama)
}

/// Integrates from t0 to t1 with fixed steps; the final partial step is
/// shortened to land exactly on t1. `t1 == t0` yields a single-node segment.
pub fn solve_segment(
    y0: &Array1<f64>,
    t0: f64,
    t1: f64,
    dt: f64,
    fields: &VectorFields,
    driver: &BrownianDriver,
    scheme: Scheme,
) -> Result<PathSegment> {
    if t1 < t0 {
        return Err(Error::InvalidArgument(format!("segment must have t0 <= t1, got [{t0}, {t1}]")));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let mut times = vec![t0];
    let mut states = vec![y0.clone()];
    let mut t = t0;
    let mut y = y0.clone();
    while t < t1 {
        let remaining = t1 - t;
        let h = if remaining <= dt * (1.0 + 1e-9) { remaining } else { dt };
        y = sde_step(&y, t, h, fields, driver, scheme)?;
        t = if h == remaining { t1 } else { t + h };
        times.push(t);
        states.push(y.clone());
    }
    Ok(PathSegment { times, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::sample_driver;
    use ndarray::{array, Array2};

    fn constant_drift(c: f64) -> VectorFields {
        VectorFields::deterministic(1, Box::new(move |_y: &Array1<f64>| array![c]))
    }

    #[test]
    fn constant_drift_is_exact() {
        let driver = sample_driver(1, 0.0, 1.0, 0.1, 1).unwrap();
        let f = constant_drift(2.5);
        let y = stratonovich_step(&array![1.0], 0.0, 0.25, &f, &driver).unwrap();
        assert!((y[0] - (1.0 + 2.5 * 0.25)).abs() < 1e-15);
    }

    #[test]
    fn additive_noise_is_exact() {
        let driver = sample_driver(2, 0.0, 1.0, 0.05, 3).unwrap();
        let sigma = array![[0.3, 0.1], [0.0, 0.7]];
        let s = sigma.clone();
        let f = VectorFields::new(
            2,
            2,
            Box::new(|_y: &Array1<f64>| Array1::zeros(2)),
            Box::new(move |_y: &Array1<f64>| s.clone()),
        );
        let y0 = array![0.5, -0.5];
        let y = stratonovich_step(&y0, 0.1, 0.2, &f, &driver).unwrap();
        let db = driver.increment(0.1, 0.3).unwrap();
        let expect = &y0 + &sigma.dot(&db);
        for i in 0..2 {
            assert!((y[i] - expect[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn heun_decay_matches_exponential() {
        let driver = sample_driver(1, 0.0, 2.0, 0.01, 4).unwrap();
        let f = VectorFields::deterministic(1, Box::new(|y: &Array1<f64>| -y.clone()));
        let mut y = array![1.0];
        for k in 0..100 {
            y = stratonovich_step(&y, 0.01 * k as f64, 0.01, &f, &driver).unwrap();
        }
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-4);
    }

    #[test]
    fn segment_hits_ou_mean_and_handles_empty_interval() {
        // dv = mu (c - v) dt with sigma = 0: v_T = c + (v0 - c) e^{-mu T}
        let mu = 1.7;
        let c = 0.8;
        let driver = sample_driver(1, 0.0, 1.0, 1e-3, 9).unwrap();
        let f = VectorFields::deterministic(1, Box::new(move |y: &Array1<f64>| array![mu * (c - y[0])]));
        let seg = solve_segment(&array![2.0], 0.0, 1.0, 1e-3, &f, &driver, Scheme::Heun).unwrap();
        let exact = c + (2.0 - c) * (-mu).exp();
        assert!((seg.final_state()[0] - exact).abs() < 1e-4);
        assert_eq!(seg.t_end(), 1.0);

        let single = solve_segment(&array![2.0], 0.3, 0.3, 0.01, &f, &driver, Scheme::Heun).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single.final_state()[0], 2.0);
    }

    #[test]
    fn ou_mean_is_noise_independent() {
        // mean of v_T over driver seeds matches the sigma = 0 value within 3 SE
        let mu = 1.0;
        let c = 0.5;
        let sigma = 0.25;
        let f = VectorFields::new(
            1,
            1,
            Box::new(move |y: &Array1<f64>| array![mu * (c - y[0])]),
            Box::new(move |_y: &Array1<f64>| Array2::from_elem((1, 1), sigma)),
        );
        let n = 10_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for seed in 0..n {
            let driver = sample_driver(1, 0.0, 1.0, 1e-2, seed).unwrap();
            let seg =
                solve_segment(&array![1.5], 0.0, 1.0, 1e-2, &f, &driver, Scheme::Heun).unwrap();
            let v = seg.final_state()[0];
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let sd = (sum_sq / n as f64 - mean * mean).sqrt();
        let se = sd / (n as f64).sqrt();
        let deterministic = c + (1.5 - c) * (-mu).exp();
        assert!(
            (mean - deterministic).abs() < 3.0 * se + 1e-4,
            "mean {mean} vs deterministic {deterministic} (se {se})"
        );
    }

    #[test]
    fn heun_is_second_order_on_smooth_fields() {
        let driver = sample_driver(1, 0.0, 1.0, 1e-4, 11).unwrap();
        let f = VectorFields::deterministic(
            1,
            Box::new(|y: &Array1<f64>| array![(1.0 - y[0] * y[0]) * 0.9 + 0.1]),
        );
        let solve = |dt: f64| {
            solve_segment(&array![0.1], 0.0, 1.0, dt, &f, &driver, Scheme::Heun)
                .unwrap()
                .final_state()[0]
        };
        let reference = solve(1e-5);
        let e1 = (solve(0.02) - reference).abs();
        let e2 = (solve(0.01) - reference).abs();
        let ratio = e1 / e2;
        assert!((3.2..=4.8).contains(&ratio), "error ratio {ratio}");
    }

    #[test]
    fn non_finite_fields_are_reported() {
        let driver = sample_driver(1, 0.0, 1.0, 0.1, 1).unwrap();
        let f = VectorFields::deterministic(1, Box::new(|y: &Array1<f64>| array![1.0 / (y[0] - y[0])]));
        let err = stratonovich_step(&array![1.0], 0.0, 0.1, &f, &driver).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }
}
