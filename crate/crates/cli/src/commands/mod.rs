pub mod gradcheck;
pub mod kernel;
pub mod simulate;
pub mod train;

use std::path::Path;

use eventsde::ssnn::{NetworkParams, SimulationConfig};
use eventsde::Scheme;
use ndarray::{Array1, Array2};

use crate::config::Config;
use crate::CliError;

pub(crate) fn network_from_config(cfg: &mut Config) -> Result<NetworkParams, CliError> {
    let k: usize = cfg.get("model.k", 1usize)?;
    let mut params = NetworkParams::new(k);
    params.mu = (cfg.get("model.mu1", 15.0)?, cfg.get("model.mu2", 0.0)?);
    params.sigma = (cfg.get("model.sigma1", 0.0)?, cfg.get("model.sigma2", 0.0)?);
    params.v_reset = cfg.get("model.v_reset", 1.4)?;
    params.alpha = cfg.get("model.alpha", 0.03)?;
    params.psi = cfg.get("model.psi", 1.0)?;
    params.beta = cfg.get("model.beta", 0.2)?;
    if let Some(cap) = cfg.optional_f64("model.lambda_cap")? {
        params.lambda_cap = Some(cap);
    }
    if let Some(rows) = cfg.optional_matrix("model.w")? {
        if rows.len() != k || rows.iter().any(|r| r.len() != k) {
            return Err(CliError::Usage(format!("model.w must be a {k} x {k} matrix")));
        }
        let mut w = Array2::zeros((k, k));
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                w[[i, j]] = *v;
            }
        }
        params.w = w;
    }
    if let Some(input) = cfg.optional_f64_list("model.input")? {
        if input.len() != k {
            return Err(CliError::Usage(format!("model.input needs {k} entries")));
        }
        params.input_current = Some(Array1::from(input));
    }
    params.validate().map_err(|err| CliError::Usage(err.to_string()))?;
    Ok(params)
}

pub(crate) fn simulation_from_config(
    cfg: &mut Config,
    seed: u64,
    k: usize,
) -> Result<SimulationConfig, CliError> {
    let t_end: f64 = cfg.get("sim.t_end", 1.0)?;
    let dt: f64 = cfg.get("sim.dt", 0.01)?;
    let batch: usize = cfg.get("sim.batch", 10usize)?;
    let mut sim = SimulationConfig::new(t_end, dt, seed, batch);
    sim.n_max = cfg.get("sim.n_max", 100_000usize)?;
    sim.scheme = scheme_from_config(cfg, "sim.scheme")?;
    sim.resolution = cfg.optional_f64("sim.resolution")?;
    for (key, slot) in [("model.v0", &mut sim.v0), ("model.i0", &mut sim.i0)] {
        if let Some(list) = cfg.optional_f64_list(key)? {
            if list.len() != k {
                return Err(CliError::Usage(format!("{key} needs {k} entries")));
            }
            *slot = Some(list);
        }
    }
    Ok(sim)
}

pub(crate) fn scheme_from_config(cfg: &mut Config, key: &str) -> Result<Scheme, CliError> {
    match cfg.get_string(key, "euler").as_str() {
        "euler" => Ok(Scheme::EulerMaruyama),
        "heun" => Ok(Scheme::Heun),
        other => Err(CliError::Usage(format!("{key} must be euler or heun, got {other:?}"))),
    }
}

pub(crate) fn write_output(dir: &Path, name: &str, content: &str) -> Result<(), CliError> {
    std::fs::write(dir.join(name), content)
        .map_err(|err| CliError::Numerical(format!("cannot write {name}: {err}")))
}

pub(crate) fn finish(
    cfg: &Config,
    out_dir: &Path,
) -> Result<(), CliError> {
    cfg.reject_unknown()?;
    write_output(out_dir, "config.resolved", &cfg.resolved_text())
}
