//! `gradcheck`: pathwise gradients against the finite-difference oracle on
//! frozen seeds, plus the model-assumption report.

use std::path::Path;

use eventsde::rng::{derive_seed, sample_seed, UniformStream};
use eventsde::ssnn::{build_slif_network, build_slif_network_reset_to_zero, NetworkParams};
use eventsde::{
    finite_difference_oracle, forward_sensitivity, sample_driver, Error as SolverError,
    OracleOutput, Scheme, SolveSettings,
};
use serde_json::json;

use crate::config::Config;
use crate::CliError;

use super::finish;

fn target_coordinate(name: &str) -> Result<usize, CliError> {
    // single-neuron state layout (v, i, s): v0 is coordinate 0, the constant
    // input current c is coordinate 1
    match name {
        "v0" => Ok(0),
        "c" => Ok(1),
        other => Err(CliError::Usage(format!("unknown gradcheck target {other:?} (use c, v0)"))),
    }
}

pub fn run(cfg: &mut Config, out_dir: &Path, seed: u64) -> Result<(), CliError> {
    let model = cfg.get_string("gradcheck.model", "slif");
    let sigma: f64 = cfg.get("gradcheck.sigma", 0.0)?;
    let c: f64 = cfg.get("gradcheck.c", 1.5)?;
    let n_spikes: usize = cfg.get("gradcheck.n_spikes", 3usize)?;
    let seeds: usize = cfg.get("gradcheck.seeds", 20usize)?;
    let h: f64 = cfg.get("gradcheck.h", 1e-5)?;
    let rtol: f64 = cfg.get("gradcheck.rtol", if sigma == 0.0 { 1e-3 } else { 1e-2 })?;
    let dt: f64 = cfg.get("gradcheck.dt", 1e-3)?;
    let resolution: f64 = cfg.get("gradcheck.resolution", 0.01)?;
    let t_end: f64 = cfg.get("gradcheck.t_end", 2.5)?;
    let max_fail_fraction: f64 = cfg.get("gradcheck.max_fail_fraction", 0.0)?;
    let targets_raw = cfg.get_string("gradcheck.targets", "c,v0");
    finish(cfg, out_dir)?;

    let targets = targets_raw
        .split(',')
        .map(|t| target_coordinate(t.trim()).map(|c| (t.trim().to_string(), c)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut params = NetworkParams::new(1);
    params.mu = (15.0, 0.0);
    params.sigma = (sigma, 0.0);
    params.v_reset = 1.4;
    params.alpha = 0.03;
    let system = match model.as_str() {
        "slif" => build_slif_network(&params),
        "slif-broken-reset" => build_slif_network_reset_to_zero(&params),
        other => {
            return Err(CliError::Usage(format!(
                "unknown gradcheck model {other:?} (use slif or slif-broken-reset)"
            )))
        }
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;

    let mut entries = Vec::new();
    let mut flagged = 0usize;
    let mut failed = 0usize;
    let mut compared = 0usize;
    let mut assumption_failures = Vec::new();
    for index in 0..seeds {
        let seed_i = sample_seed(seed, index as u64);
        let driver = sample_driver(2, 0.0, t_end, resolution, derive_seed(seed_i, "driver"))
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        let uniforms = UniformStream::new(derive_seed(seed_i, "events"));
        let y0 = system.initial_state(None, Some(&[c]), derive_seed(seed_i, "init"));
        let settings =
            SolveSettings::new(0.0, t_end, dt, n_spikes).with_scheme(Scheme::Heun);
        let fs = forward_sensitivity(
            &y0,
            &system.fields,
            &system.specs,
            &driver,
            &uniforms,
            &settings,
        )
        .map_err(|e| CliError::Numerical(e.to_string()))?;
        if !fs.assumptions.pass() {
            for record in &fs.assumptions.records {
                if !record.pass(fs.assumptions.atol, fs.assumptions.transversality_floor) {
                    assumption_failures.push(json!({
                        "seed_index": index,
                        "event": record.event_index,
                        "commutation_residual": record.commutation_residual,
                        "orthogonality_residual": record.orthogonality_residual,
                        "transversality": record.transversality,
                    }));
                }
            }
            continue; // the gradient theory does not apply to this model
        }
        if fs.solution.n_events() < n_spikes {
            flagged += 1;
            entries.push(json!({
                "seed_index": index, "status": "flagged", "reason": "too few events",
            }));
            continue;
        }
        let mut worst: f64 = 0.0;
        let mut seed_flagged = false;
        'events: for event in 0..n_spikes {
            let fd = match finite_difference_oracle(
                &y0,
                &system.fields,
                &system.specs,
                &driver,
                &uniforms,
                &settings,
                OracleOutput::EventTime(event),
                h,
            ) {
                Ok(fd) => fd,
                Err(SolverError::NonDifferentiablePoint { .. }) => {
                    seed_flagged = true;
                    break 'events;
                }
                Err(other) => return Err(CliError::Numerical(other.to_string())),
            };
            for (_, coord) in &targets {
                let pathwise = fs.sensitivity.event_time_grads[event][*coord];
                let gap = (pathwise - fd[*coord]).abs()
                    / pathwise.abs().max(fd[*coord].abs()).max(1e-9);
                worst = worst.max(gap);
            }
        }
        if seed_flagged {
            flagged += 1;
            entries.push(json!({
                "seed_index": index, "status": "flagged", "reason": "event count boundary",
            }));
            continue;
        }
        compared += 1;
        let status = if worst <= rtol { "pass" } else { "fail" };
        if status == "fail" {
            failed += 1;
        }
        entries.push(json!({
            "seed_index": index, "status": status, "worst_rel_err": worst,
        }));
    }

    let fail_fraction = if compared > 0 { failed as f64 / compared as f64 } else { 0.0 };
    let report = json!({
        "model": model,
        "sigma": sigma,
        "rtol": rtol,
        "h": h,
        "seeds": seeds,
        "compared": compared,
        "flagged": flagged,
        "failed": failed,
        "fail_fraction": fail_fraction,
        "assumption_failures": assumption_failures,
        "targets": targets.iter().map(|(name, _)| name.clone()).collect::<Vec<_>>(),
        "entries": entries,
    });
    super::write_output(out_dir, "report.json", &format!("{:#}\n", report))?;
    if fail_fraction > max_fail_fraction {
        return Err(CliError::Numerical(format!(
            "{failed} of {compared} gradient comparisons exceeded rtol {rtol}"
        )));
    }
    Ok(())
}
