//! `simulate`: batch spike-train generation with a solution summary.

use std::path::Path;

use eventsde::check_assumptions;
use eventsde::ssnn::{build_slif_network, for_each_solution};
use serde_json::json;

use crate::config::Config;
use crate::CliError;

use super::{finish, network_from_config, simulation_from_config, write_output};

pub fn run(cfg: &mut Config, out_dir: &Path, seed: u64) -> Result<(), CliError> {
    let params = network_from_config(cfg)?;
    let sim = simulation_from_config(cfg, seed, params.k)?;
    finish(cfg, out_dir)?;

    let system = build_slif_network(&params).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut batch_trains = Vec::with_capacity(sim.batch);
    let mut total_events = 0usize;
    let mut min_gap: Option<f64> = None;
    let mut assumptions_pass = true;
    let mut max_commutation = 0.0f64;
    let mut max_orthogonality = 0.0f64;
    let mut min_transversality: Option<f64> = None;
    for_each_solution(&system, &sim, |_sample, solution| {
        total_events += solution.n_events();
        if let Some(gap) = solution.min_gap_per_label(params.k) {
            min_gap = Some(min_gap.map_or(gap, |g| g.min(gap)));
        }
        let report = check_assumptions(solution, &system.fields, &system.specs);
        assumptions_pass &= report.pass();
        for record in &report.records {
            max_commutation = max_commutation.max(record.commutation_residual);
            max_orthogonality = max_orthogonality.max(record.orthogonality_residual);
            let t = record.transversality.abs();
            min_transversality = Some(min_transversality.map_or(t, |m| m.min(t)));
        }
        batch_trains.push(solution.spike_trains(params.k));
        Ok(())
    })
    .map_err(|e| CliError::Numerical(e.to_string()))?;

    let mut csv = Vec::new();
    sigkernel::io::write_spike_trains_csv(&mut csv, &batch_trains)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    write_output(out_dir, "spikes.csv", &String::from_utf8_lossy(&csv))?;

    let bound = params.refractory_bound();
    let summary = json!({
        "seed": seed,
        "neurons": params.k,
        "batch": sim.batch,
        "total_events": total_events,
        "events_per_sample": total_events as f64 / sim.batch.max(1) as f64,
        "min_inter_spike_gap": min_gap,
        "refractory_bound": bound,
        "gaps_respect_refractory_bound": min_gap.map_or(true, |g| g >= bound),
        "assumptions": {
            "pass": assumptions_pass,
            "max_commutation_residual": max_commutation,
            "max_orthogonality_residual": max_orthogonality,
            "min_abs_transversality": min_transversality,
        },
    });
    write_output(out_dir, "summary.json", &format!("{:#}\n", summary))
}
