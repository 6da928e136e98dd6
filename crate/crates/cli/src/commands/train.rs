//! `train`: the input-current and synaptic-weight experiments.

use std::fmt::Write as _;
use std::path::Path;

use ssnn_train::{
    experiment_input_current, experiment_weights, InputCurrentConfig, TrainRun, WeightsConfig,
};
use serde_json::json;

use crate::config::Config;
use crate::CliError;

use super::{finish, write_output};

fn write_run_csv(
    out_dir: &Path,
    run: &TrainRun,
    snapshot_every: usize,
) -> Result<(), CliError> {
    let mut csv = String::from("step,loss,test_metric,snapshot\n");
    for (record, estimate) in run.records.iter().zip(&run.estimates) {
        let snapshot = if snapshot_every > 0 && record.step % snapshot_every == 0 {
            let name = format!("params_{:05}.csv", record.step);
            let mut body = String::from("index,value\n");
            for (i, v) in estimate.iter().enumerate() {
                let _ = writeln!(body, "{i},{v}");
            }
            write_output(out_dir, &name, &body)?;
            name
        } else {
            String::new()
        };
        let _ = writeln!(
            csv,
            "{},{},{},{snapshot}",
            record.step, record.loss, record.test_metric
        );
    }
    write_output(out_dir, "train.csv", &csv)?;
    let mut final_body = String::from("index,value\n");
    for (i, v) in run.final_estimate.iter().enumerate() {
        let _ = writeln!(final_body, "{i},{v}");
    }
    write_output(out_dir, "params_final.csv", &final_body)
}

pub fn run(cfg: &mut Config, out_dir: &Path, seed: u64) -> Result<(), CliError> {
    let experiment = cfg.get_string("train.experiment", "input_current");
    let snapshot_every: usize = cfg.get("train.snapshot_every", 0usize)?;
    match experiment.as_str() {
        "input_current" => {
            let exp = InputCurrentConfig {
                sample_size: cfg.get("train.sample_size", 64usize)?,
                sigma: cfg.get("train.sigma", 0.1)?,
                steps: cfg.get("train.steps", 400usize)?,
                seed,
                lr: cfg.get("train.lr", 1e-3)?,
                dt: cfg.get("train.dt", 0.01)?,
                t_end: cfg.get("train.t_end", 2.0)?,
                n_spikes: cfg.get("train.n_spikes", 3usize)?,
                kernel_depth: cfg.get("train.kernel_depth", 3usize)?,
                true_c: cfg.get("train.true_c", 1.5)?,
            };
            let c_tol: f64 = cfg.get("train.threshold.c_tol", 0.15)?;
            finish(cfg, out_dir)?;
            let run = experiment_input_current(&exp)
                .map_err(|e| CliError::Numerical(e.to_string()))?;
            write_run_csv(out_dir, &run, snapshot_every)?;
            let error = (run.final_estimate[0] - exp.true_c).abs();
            let passed = error <= c_tol;
            let summary = json!({
                "experiment": "input_current",
                "seed": seed,
                "config": run.config,
                "initial_estimate": run.initial_estimate,
                "final_estimate": run.final_estimate,
                "target": run.target,
                "absolute_error": error,
                "threshold": c_tol,
                "passed": passed,
            });
            write_output(out_dir, "summary.json", &format!("{:#}\n", summary))?;
            if passed {
                Ok(())
            } else {
                Err(CliError::Numerical(format!(
                    "estimate {:.4} missed the target band (error {error:.4} > {c_tol})",
                    run.final_estimate[0]
                )))
            }
        }
        "weights" => {
            let steps: usize = cfg.get("train.steps", 600usize)?;
            let exp = WeightsConfig {
                layers: cfg.get_layer_list("train.layers", "2-4-2")?,
                sample_size: cfg.get("train.sample_size", 256usize)?,
                batch: cfg.get("train.batch", 16usize)?,
                steps,
                seed,
                lr: cfg.get("train.lr", 3e-3)?,
                lr_drop_step: Some(cfg.get("train.lr_drop_step", steps * 2 / 3)?),
                lr_after: cfg.get("train.lr_after", 1e-3)?,
                dt: cfg.get("train.dt", 0.01)?,
                t_end: cfg.get("train.t_end", 2.0)?,
                sigma: (cfg.get("train.sigma1", 0.25)?, cfg.get("train.sigma2", 0.25)?),
                input_drive: cfg.get("train.input_drive", 10.0)?,
                count_matching: cfg.get("train.count_matching", true)?,
                kernel_depth: cfg.get("train.kernel_depth", 3usize)?,
                n_max: cfg.get("train.n_max", 20usize)?,
                pin_event_count: cfg.get("train.pin_event_count", true)?,
                init_at_truth: cfg.get("train.init_at_truth", false)?,
                test_size: cfg.get("train.test_size", 64usize)?,
            };
            let reduction: f64 = cfg.get("train.threshold.mae_reduction", 0.5)?;
            finish(cfg, out_dir)?;
            let run =
                experiment_weights(&exp).map_err(|e| CliError::Numerical(e.to_string()))?;
            write_run_csv(out_dir, &run, snapshot_every)?;
            let initial_mae = run.records.first().map_or(f64::NAN, |r| r.test_metric);
            let final_mae: f64 = run
                .final_estimate
                .iter()
                .zip(&run.target)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / run.target.len().max(1) as f64;
            let passed = final_mae <= (1.0 - reduction) * initial_mae;
            let summary = json!({
                "experiment": "weights",
                "seed": seed,
                "config": run.config,
                "initial_mae": initial_mae,
                "final_mae": final_mae,
                "required_reduction": reduction,
                "final_test_mmd": run.final_test_mmd,
                "target": run.target,
                "final_estimate": run.final_estimate,
                "passed": passed,
            });
            write_output(out_dir, "summary.json", &format!("{:#}\n", summary))?;
            if passed {
                Ok(())
            } else {
                Err(CliError::Numerical(format!(
                    "weight MAE {final_mae:.4} did not reach the required reduction from {initial_mae:.4}"
                )))
            }
        }
        other => Err(CliError::Usage(format!(
            "train.experiment must be input_current or weights, got {other:?}"
        ))),
    }
}
