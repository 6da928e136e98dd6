//! Eligibility traces: local per-synapse accumulators whose product with a
//! global modulator estimates weight gradients.
//!
//! For synapse (j, k) the trace pair (a, b) follows the same linear dynamics
//! as (v, i) between spikes,
//!
//! ```text
//! da = mu1 (b - a) dt     db = -mu2 b dt
//! ```
//!
//! with b jumping by one at presynaptic spikes and a jumping by
//! v_reset a / (i^k - v^k) at postsynaptic spikes. When the synaptic graph is
//! a DAG the trace at neuron k's last spike reproduces the exact spike-time
//! gradient; otherwise the traces are proxies and the result is flagged.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::events::EventSolution;
use crate::sensitivity::TRANSVERSALITY_FLOOR;

use super::online::gamma_exp;
use super::SlifSystem;

#[derive(Debug, Clone)]
pub struct EligibilityTraces {
    /// gradients[[j, k]] estimates dL/dw[j, k].
    pub gradients: Array2<f64>,
    /// Whether the nonzero-weight graph is acyclic; if not, the gradients are
    /// proxies without an exactness guarantee.
    pub dag: bool,
    /// Trace values (a, b) propagated to the final time, for diagnostics.
    pub a_end: Array2<f64>,
    pub b_end: Array2<f64>,
}

fn is_dag(w: &Array2<f64>) -> bool {
    let k = w.nrows();
    // Kahn's algorithm on edges j -> k where w[j, k] != 0
    let mut indegree = vec![0usize; k];
    for j in 0..k {
        for t in 0..k {
            if j != t && w[[j, t]] != 0.0 {
                indegree[t] += 1;
            }
        }
    }
    let mut queue: Vec<usize> = (0..k).filter(|n| indegree[*n] == 0).collect();
    let mut seen = 0;
    while let Some(j) = queue.pop() {
        seen += 1;
        for t in 0..k {
            if j != t && w[[j, t]] != 0.0 {
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    queue.push(t);
                }
            }
        }
    }
    seen == k
}

/// Integrates the traces along a solved trajectory and combines them with the
/// global modulator dL/d(tau^k), evaluated at each neuron's last spike.
pub fn eligibility_traces(
    system: &SlifSystem,
    solution: &EventSolution,
    modulator: &dyn Fn(usize, f64) -> f64,
) -> Result<EligibilityTraces> {
    let params = &system.params;
    let k_total = params.k;
    let (mu1, mu2) = params.mu;
    let mut a = Array2::<f64>::zeros((k_total, k_total));
    let mut b = Array2::<f64>::zeros((k_total, k_total));
    // (time, a value just before the jump, v, i) at each neuron's last spike
    let mut last_spike: Vec<Option<(f64, Vec<f64>, f64, f64)>> = vec![None; k_total];
    let mut t_now = solution
        .segments
        .first()
        .map_or(0.0, |seg| seg.t_start());

    let propagate = |a: &mut Array2<f64>, b: &mut Array2<f64>, from: f64, to: f64| {
        let h = to - from;
        if h <= 0.0 {
            return;
        }
        let m = gamma_exp(mu1, mu2, h);
        for j in 0..k_total {
            for k in 0..k_total {
                let pair = [a[[j, k]], b[[j, k]]];
                a[[j, k]] = m[0][0] * pair[0] + m[0][1] * pair[1];
                b[[j, k]] = m[1][1] * pair[1];
            }
        }
    };

    for n in 0..solution.n_events() {
        let tau = solution.event_times[n];
        propagate(&mut a, &mut b, t_now, tau);
        t_now = tau;
        let spiker = solution.event_labels[n];
        let y_pre = &solution.pre_event_states[n];
        let v = y_pre[system.v_index(spiker)];
        let i = y_pre[system.i_index(spiker)];
        if (mu1 * (i - v)).abs() < TRANSVERSALITY_FLOOR {
            return Err(Error::Transversality {
                event_index: n,
                value: (mu1 * (i - v)).abs(),
                floor: TRANSVERSALITY_FLOOR,
            });
        }
        let a_pre: Vec<f64> = (0..k_total).map(|j| a[[j, spiker]]).collect();
        last_spike[spiker] = Some((tau, a_pre, v, i));
        // postsynaptic jump of a, presynaptic jump of b
        for j in 0..k_total {
            if j != spiker {
                a[[j, spiker]] += params.v_reset * a[[j, spiker]] / (i - v);
            }
        }
        for k in 0..k_total {
            if k != spiker {
                b[[spiker, k]] += 1.0;
            }
        }
    }
    propagate(&mut a, &mut b, t_now, solution.final_time);

    let mut gradients = Array2::<f64>::zeros((k_total, k_total));
    for k in 0..k_total {
        if let Some((tau, a_pre, v, i)) = &last_spike[k] {
            let weight = modulator(k, *tau) / (mu1 * (v - i));
            for j in 0..k_total {
                if j != k {
                    gradients[[j, k]] = weight * a_pre[j];
                }
            }
        }
    }

    Ok(EligibilityTraces { gradients, dag: is_dag(&params.w), a_end: a, b_end: b })
}
