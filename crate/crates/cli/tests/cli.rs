//! End-to-end checks of the command-line interface: determinism of outputs,
//! config echoing, exit codes, and the documented error paths.

use std::path::{Path, PathBuf};
use std::process::Command;

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_eventsde")
}

struct Workspace {
    root: PathBuf,
}

impl Workspace {
    fn new(tag: &str) -> Self {
        let root = std::env::temp_dir()
            .join(format!("eventsde-cli-{}-{tag}", std::process::id()));
        let _ = std::fs::remove_dir_all(&root);
        std::fs::create_dir_all(&root).unwrap();
        Self { root }
    }

    fn file(&self, name: &str, content: &str) -> PathBuf {
        let path = self.root.join(name);
        std::fs::write(&path, content).unwrap();
        path
    }

    fn dir(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

impl Drop for Workspace {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.root);
    }
}

fn run(args: &[&str]) -> (i32, String) {
    let output = Command::new(binary()).args(args).output().unwrap();
    let stderr = String::from_utf8_lossy(&output.stderr).into_owned();
    (output.status.code().unwrap_or(-1), stderr)
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

const SIMULATE_CFG: &str = "\
seed = 42
model.k = 1
model.mu1 = 15
model.sigma1 = 0.1
model.i0 = 1.5
sim.t_end = 1.0
sim.dt = 0.01
sim.batch = 10
";

#[test]
fn simulate_is_deterministic_and_reproducible_from_the_echo() {
    let ws = Workspace::new("sim");
    let cfg = ws.file("sim.cfg", SIMULATE_CFG);
    let out1 = ws.dir("run1");
    let out2 = ws.dir("run2");
    let (code, err) = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out1.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let (code, _) = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(read(&out1.join("spikes.csv")), read(&out2.join("spikes.csv")));
    assert_eq!(read(&out1.join("summary.json")), read(&out2.join("summary.json")));

    // rerunning from the echoed resolved config reproduces the outputs
    let out3 = ws.dir("run3");
    let (code, err) = run(&[
        "simulate",
        "--config",
        out1.join("config.resolved").to_str().unwrap(),
        "--out",
        out3.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(read(&out1.join("spikes.csv")), read(&out3.join("spikes.csv")));

    // summary carries the refractory check
    let summary = read(&out1.join("summary.json"));
    assert!(summary.contains("\"gaps_respect_refractory_bound\": true"), "{summary}");
}

#[test]
fn simulate_with_intensity_disabled_writes_a_header_only_csv() {
    let ws = Workspace::new("quiet");
    let cfg = ws.file(
        "quiet.cfg",
        "seed = 1\nmodel.k = 1\nmodel.psi = 1e9\nsim.batch = 3\nsim.t_end = 0.5\nsim.dt = 0.01\n",
    );
    let out = ws.dir("out");
    let (code, err) =
        run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(read(&out.join("spikes.csv")), "sample_id,neuron_id,spike_time\n");
}

#[test]
fn unknown_keys_and_malformed_configs_exit_with_code_two() {
    let ws = Workspace::new("bad");
    let cfg = ws.file("bad.cfg", "seed = 1\nmodel.k = 1\nmystery.key = 3\n");
    let out = ws.dir("out");
    let (code, err) =
        run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("mystery.key"), "{err}");

    let broken = ws.file("broken.cfg", "seed 1\n");
    let (code, err) = run(&[
        "simulate",
        "--config",
        broken.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn seed_flag_overrides_the_config() {
    let ws = Workspace::new("seedflag");
    let cfg = ws.file("sim.cfg", SIMULATE_CFG);
    let out1 = ws.dir("a");
    let out2 = ws.dir("b");
    run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out1.to_str().unwrap()]);
    run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert_ne!(read(&out1.join("spikes.csv")), read(&out2.join("spikes.csv")));
}

#[test]
fn gradcheck_passes_on_the_deterministic_neuron_and_reports_broken_models() {
    let ws = Workspace::new("gradcheck");
    let cfg = ws.file(
        "gc.cfg",
        "seed = 3\ngradcheck.model = slif\ngradcheck.sigma = 0\ngradcheck.seeds = 3\ngradcheck.dt = 0.001\n",
    );
    let out = ws.dir("out");
    let (code, err) =
        run(&["gradcheck", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let report = read(&out.join("report.json"));
    assert!(report.contains("\"failed\": 0"), "{report}");

    let broken = ws.file(
        "broken.cfg",
        "seed = 3\ngradcheck.model = slif-broken-reset\ngradcheck.sigma = 0.25\ngradcheck.seeds = 2\n",
    );
    let out2 = ws.dir("out2");
    let (code, err) = run(&[
        "gradcheck",
        "--config",
        broken.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let report = read(&out2.join("report.json"));
    assert!(report.contains("commutation_residual"), "{report}");
    assert!(report.contains("0.25"), "assumption-3 failure carries the residual: {report}");
}

#[test]
fn kernel_command_separates_rates_and_rejects_tiny_batches() {
    let ws = Workspace::new("kernel");
    // build two spike-train sets by simulating at different drives
    let quiet = ws.file(
        "quiet.cfg",
        "seed = 9\nmodel.k = 1\nmodel.i0 = 1.2\nmodel.sigma1 = 0.1\nsim.batch = 24\nsim.t_end = 1.0\nsim.dt = 0.01\n",
    );
    let hot = ws.file(
        "hot.cfg",
        "seed = 10\nmodel.k = 1\nmodel.i0 = 1.8\nmodel.sigma1 = 0.1\nsim.batch = 24\nsim.t_end = 1.0\nsim.dt = 0.01\n",
    );
    let quiet_out = ws.dir("quiet");
    let hot_out = ws.dir("hot");
    assert_eq!(run(&["simulate", "--config", quiet.to_str().unwrap(), "--out", quiet_out.to_str().unwrap()]).0, 0);
    assert_eq!(run(&["simulate", "--config", hot.to_str().unwrap(), "--out", hot_out.to_str().unwrap()]).0, 0);

    let kernel_cfg = ws.file("kernel.cfg", "seed = 11\nkernel.t_end = 1.0\nkernel.neurons = 1\n");
    let out = ws.dir("report");
    let (code, err) = run(&[
        "kernel",
        "--config",
        kernel_cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        quiet_out.join("spikes.csv").to_str().unwrap(),
        hot_out.join("spikes.csv").to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let report = read(&out.join("report.json"));
    let parsed: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert!(parsed["p_value"].as_f64().unwrap() <= 0.01, "{report}");
    assert!(parsed["gram_min_eigenvalue"].as_f64().unwrap() >= -1e-10);

    // identical sets sit in the permutation bulk
    let same = ws.dir("same");
    let (code, _) = run(&[
        "kernel",
        "--config",
        kernel_cfg.to_str().unwrap(),
        "--out",
        same.to_str().unwrap(),
        quiet_out.join("spikes.csv").to_str().unwrap(),
        quiet_out.join("spikes.csv").to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let parsed: serde_json::Value =
        serde_json::from_str(&read(&same.join("report.json"))).unwrap();
    assert!(parsed["p_value"].as_f64().unwrap() >= 0.5);

    // an empty file is a parse error with exit code 2
    let empty = ws.file("empty.csv", "");
    let out2 = ws.dir("bad");
    let (code, err) = run(&[
        "kernel",
        "--config",
        kernel_cfg.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
        empty.to_str().unwrap(),
        hot_out.join("spikes.csv").to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "{err}");

    // batches below two paths are usage errors
    let tiny = ws.file("tiny.csv", "sample_id,neuron_id,spike_time\n0,0,0.5\n");
    let out3 = ws.dir("tiny");
    let (code, _) = run(&[
        "kernel",
        "--config",
        kernel_cfg.to_str().unwrap(),
        "--out",
        out3.to_str().unwrap(),
        tiny.to_str().unwrap(),
        hot_out.join("spikes.csv").to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn train_with_zero_learning_rate_keeps_a_flat_estimate() {
    let ws = Workspace::new("train");
    let cfg = ws.file(
        "train.cfg",
        "seed = 21\ntrain.experiment = input_current\ntrain.sample_size = 8\ntrain.steps = 3\ntrain.lr = 0\ntrain.threshold.c_tol = 10\ntrain.snapshot_every = 1\n",
    );
    let out = ws.dir("out");
    let (code, err) =
        run(&["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let csv = read(&out.join("train.csv"));
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 4, "header plus three steps: {csv}");
    assert!(rows[1].contains("params_00000.csv"));
    // all snapshots identical under lr = 0
    let first = read(&out.join("params_00000.csv"));
    let last = read(&out.join("params_00002.csv"));
    assert_eq!(first, last);
    let summary = read(&out.join("summary.json"));
    assert!(summary.contains("\"passed\": true"));

    // steps = 0: header-only CSV, estimates in the summary
    let cfg0 = ws.file(
        "train0.cfg",
        "seed = 21\ntrain.experiment = input_current\ntrain.sample_size = 8\ntrain.steps = 0\ntrain.threshold.c_tol = 10\n",
    );
    let out0 = ws.dir("out0");
    let (code, _) =
        run(&["train", "--config", cfg0.to_str().unwrap(), "--out", out0.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(read(&out0.join("train.csv")), "step,loss,test_metric,snapshot\n");

    // a missed threshold is a training failure with exit code 1
    let strict = ws.file(
        "strict.cfg",
        "seed = 21\ntrain.experiment = input_current\ntrain.sample_size = 8\ntrain.steps = 0\ntrain.threshold.c_tol = 0.0001\n",
    );
    let out_strict = ws.dir("strict");
    let (code, err) =
        run(&["train", "--config", strict.to_str().unwrap(), "--out", out_strict.to_str().unwrap()]);
    assert_eq!(code, 1, "{err}");
    assert!(read(&out_strict.join("summary.json")).contains("\"passed\": false"));
}
