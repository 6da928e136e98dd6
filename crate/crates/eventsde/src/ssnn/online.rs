//! Online per-weight sensitivities.
//!
//! For a fixed weight w[i, j], the gradient flow G^k = d(v^k, i^k)/dw
//! propagates between events with the closed-form exponential of the 2x2
//! drift matrix and jumps only at spikes of neuron k or its parents:
//!
//! ```text
//! G^k(t) = e^{Gamma (t - s)} (G^k(s) - gamma d(tau_s) + [l = i][k = j] e2)
//! ```
//!
//! with gamma = w[l, k] (mu1, -mu2) when the spiking neuron l is a parent and
//! gamma = v_reset (mu1, 0) when l = k. Spike-time gradients follow from the
//! event-time recursion: for the threshold model directly from the membrane
//! row, for the stochastic clock through the integrated intensity.

use crate::error::{Error, Result};
use crate::events::EventSolution;
use crate::sensitivity::TRANSVERSALITY_FLOOR;

use super::{NetworkKind, SlifSystem};

/// Closed-form matrix exponential of t * [[-mu1, mu1], [0, -mu2]].
///
/// The equal-rate case uses the confluent limit mu1 t e^{-mu1 t} for the
/// off-diagonal entry instead of the difference quotient.
pub fn gamma_exp(mu1: f64, mu2: f64, t: f64) -> [[f64; 2]; 2] {
    let e1 = (-mu1 * t).exp();
    let e2 = (-mu2 * t).exp();
    let scale = mu1.abs().max(mu2.abs()).max(1.0);
    let off = if (mu1 - mu2).abs() <= 1e-9 * scale {
        mu1 * t * e1
    } else {
        mu1 * (e2 - e1) / (mu1 - mu2)
    };
    [[e1, off], [0.0, e2]]
}

fn mat_vec(m: [[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// Gradient flows and spike-time gradients for one target weight.
#[derive(Debug, Clone)]
pub struct OnlineSensitivity {
    /// d(tau)/dw for each neuron's own spikes, in spike order.
    pub spike_time_grads: Vec<Vec<f64>>,
    /// Per neuron, the flow G^k sampled just after every event of the solve.
    pub flows: Vec<Vec<(f64, [f64; 2])>>,
}

/// Propagates the per-neuron gradient flows of weight `target` along a solved
/// trajectory. The firing mode comes from the system kind: threshold networks
/// use the membrane-row formula, clock networks the integrated-intensity one.
pub fn online_sensitivity(
    system: &SlifSystem,
    solution: &EventSolution,
    target: (usize, usize),
) -> Result<OnlineSensitivity> {
    let params = &system.params;
    let k_total = params.k;
    if target.0 >= k_total || target.1 >= k_total {
        return Err(Error::InvalidArgument(format!(
            "target weight ({}, {}) outside a {k_total}-neuron network",
            target.0, target.1
        )));
    }
    let (mu1, mu2) = params.mu;
    let clock = system.kind == NetworkKind::StochasticClock;

    let mut flows_now = vec![[0.0f64; 2]; k_total];
    let mut own_integral = vec![0.0f64; k_total];
    // (d(tau_prev), lambda(v) just after the previous own spike)
    let mut prev_spike: Vec<Option<(f64, f64)>> = vec![None; k_total];
    let mut spike_time_grads = vec![Vec::new(); k_total];
    let mut flows = vec![Vec::new(); k_total];

    for (n, segment) in solution.segments.iter().enumerate() {
        for step in 0..segment.len().saturating_sub(1) {
            let h = segment.times[step + 1] - segment.times[step];
            if h == 0.0 {
                continue;
            }
            let m = gamma_exp(mu1, mu2, h);
            for k in 0..k_total {
                let f_a = if clock {
                    params.lambda_grad(segment.states[step][system.v_index(k)]) * flows_now[k][0]
                } else {
                    0.0
                };
                flows_now[k] = mat_vec(m, flows_now[k]);
                if clock {
                    let f_b = params.lambda_grad(segment.states[step + 1][system.v_index(k)])
                        * flows_now[k][0];
                    own_integral[k] += 0.5 * (f_a + f_b) * h;
                }
            }
        }

        if n >= solution.n_events() {
            break;
        }
        let spiker = solution.event_labels[n];
        let tau = solution.event_times[n];
        let y_pre = &solution.pre_event_states[n];
        let y_post = &solution.post_event_states[n];

        let d_tau = if clock {
            let lam_tau = params.lambda(y_pre[system.v_index(spiker)]);
            if lam_tau.abs() < TRANSVERSALITY_FLOOR {
                return Err(Error::Transversality {
                    event_index: n,
                    value: lam_tau.abs(),
                    floor: TRANSVERSALITY_FLOOR,
                });
            }
            let boundary = prev_spike[spiker].map_or(0.0, |(d_prev, lam_prev)| lam_prev * d_prev);
            (boundary - own_integral[spiker]) / lam_tau
        } else {
            let denom = mu1 * (y_pre[system.i_index(spiker)] - y_pre[system.v_index(spiker)]);
            if denom.abs() < TRANSVERSALITY_FLOOR {
                return Err(Error::Transversality {
                    event_index: n,
                    value: denom.abs(),
                    floor: TRANSVERSALITY_FLOOR,
                });
            }
            -flows_now[spiker][0] / denom
        };
        spike_time_grads[spiker].push(d_tau);

        for k in 0..k_total {
            if k == spiker {
                // self spike: gamma_1 = v_reset (mu1, 0)
                flows_now[k][0] -= mu1 * params.v_reset * d_tau;
                own_integral[k] = 0.0;
                prev_spike[k] = Some((d_tau, params.lambda(y_post[system.v_index(k)])));
            } else {
                let w = params.w[[spiker, k]];
                let direct = spiker == target.0 && k == target.1;
                if w != 0.0 || direct {
                    // parent spike: gamma_0 = w (mu1, -mu2), plus the direct
                    // dependence of the incremented current on the weight
                    flows_now[k][0] -= mu1 * w * d_tau;
                    flows_now[k][1] += mu2 * w * d_tau;
                    if direct {
                        flows_now[k][1] += 1.0;
                    }
                }
            }
            flows[k].push((tau, flows_now[k]));
        }
    }

    Ok(OnlineSensitivity { spike_time_grads, flows })
}
