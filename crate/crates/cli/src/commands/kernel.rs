//! `kernel`: MMD between two spike-train CSV sets with Gram diagnostics and a
//! permutation test.

use std::io::BufReader;
use std::path::Path;

use sigkernel::{
    gram_matrix, permutation_test, sym_min_eigenvalue, CadlagPath, KernelConfig, Normalization,
};
use serde_json::json;

use crate::config::Config;
use crate::CliError;

use super::finish;

fn kernel_from_config(cfg: &mut Config) -> Result<KernelConfig, CliError> {
    let depth: usize = cfg.get("kernel.depth", 3usize)?;
    let time_augment: bool = cfg.get("kernel.time_augment", true)?;
    let normalization = match cfg.get_string("kernel.normalization", "none").as_str() {
        "none" => Normalization::None,
        "robust" => Normalization::Robust(cfg.get("kernel.r", 4.0)?),
        other => {
            return Err(CliError::Usage(format!(
                "kernel.normalization must be none or robust, got {other:?}"
            )))
        }
    };
    let kernel = KernelConfig { depth, normalization, time_augment };
    kernel.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(kernel)
}

fn load_paths(
    file: &Path,
    neurons: Option<usize>,
    t_end: f64,
) -> Result<Vec<CadlagPath>, CliError> {
    let handle = std::fs::File::open(file)
        .map_err(|err| CliError::Usage(format!("cannot open {}: {err}", file.display())))?;
    let mut reader = BufReader::new(handle);
    let batch = sigkernel::io::read_spike_trains_csv(&mut reader, neurons, None)
        .map_err(|err| CliError::Usage(format!("{}: {err}", file.display())))?;
    batch
        .iter()
        .map(|trains| {
            sigkernel::spikes_to_path(trains, t_end)
                .map_err(|err| CliError::Usage(format!("{}: {err}", file.display())))
        })
        .collect()
}

pub fn run(
    cfg: &mut Config,
    out_dir: &Path,
    seed: u64,
    x_file: &Path,
    y_file: &Path,
) -> Result<(), CliError> {
    let kernel = kernel_from_config(cfg)?;
    let t_end: f64 = cfg.require("kernel.t_end")?;
    let permutations: usize = cfg.get("kernel.permutations", 199usize)?;
    let neurons = cfg.optional_usize("kernel.neurons")?;
    finish(cfg, out_dir)?;

    let xs = load_paths(x_file, neurons, t_end)?;
    let ys = load_paths(y_file, neurons, t_end)?;
    if xs.len() < 2 || ys.len() < 2 {
        return Err(CliError::Usage(format!(
            "the unbiased MMD needs at least two paths per set, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs[0].dim != ys[0].dim {
        return Err(CliError::Usage(format!(
            "path sets have dimensions {} and {}; pass kernel.neurons to align them",
            xs[0].dim, ys[0].dim
        )));
    }

    let report = permutation_test(&xs, &ys, &kernel, permutations, seed)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let mut pooled = xs.clone();
    pooled.extend(ys.iter().cloned());
    let gram = gram_matrix(&pooled, &pooled, &kernel)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let min_eigenvalue = sym_min_eigenvalue(&gram);

    let summary = json!({
        "seed": seed,
        "batch_x": xs.len(),
        "batch_y": ys.len(),
        "mmd": report.mmd,
        "p_value": report.p_value,
        "permutations": report.permutations,
        "gram_min_eigenvalue": min_eigenvalue,
    });
    super::write_output(out_dir, "report.json", &format!("{:#}\n", summary))
}
