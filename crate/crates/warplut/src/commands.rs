//! Subcommand implementations. Each returns a value for `main` to print and
//! maps failures onto [`CliError`] exit codes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use warplut_core::layers::NodeKind;
use warplut_core::netlist::{circuit_stats, harden, netlist_eval};
use warplut_core::train::{evaluate, run_training, EvalMode};
use warplut_core::{CircuitStats, MetricsRecord, Network, NetworkSpec, RelaxMode, RelaxParams};

use crate::checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
use crate::config::{load_architecture, load_dataset, RunConfig};
use crate::metrics::{gate_histogram_json, write_plot_csv, FileSink};
use crate::netlist_io::{write_netlist, NetlistFormat};
use crate::CliError;

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub mode: Option<RelaxMode>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub output_dir: PathBuf,
    pub records: Vec<MetricsRecord>,
    pub checkpoint: PathBuf,
}

/// Trains from a config file. Writes `effective_config.json`,
/// `architecture.json`, `metrics.csv`, `metrics.jsonl`, `plot.csv`,
/// `gate_histogram.json` and `checkpoint.json` + `checkpoint.bin`.
pub fn cmd_train(opts: &TrainOptions) -> Result<TrainReport, CliError> {
    let mut cfg = RunConfig::load(&opts.config)?;
    if let Some(seed) = opts.seed {
        cfg.train.seed = seed;
    }
    if let Some(mode) = opts.mode {
        cfg.train.mode = mode;
    }
    if let Some(out) = &opts.out {
        cfg.output_dir = out.clone();
    }
    let mut spec = cfg.network_spec()?;
    if let Some(seed) = opts.seed {
        spec.seed = seed;
    }
    if let Some(t) = cfg.train.tau_group {
        spec.group_sum.tau = t;
    }
    let (train, val) = load_dataset(&cfg.dataset)?;
    let mut network = Network::build(&spec).map_err(|e| CliError::Config(e.to_string()))?;
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;

    write_json(&out.join("architecture.json"), &spec)?;
    let effective = RunConfig {
        architecture: "architecture.json".into(),
        output_dir: ".".into(),
        node: None,
        init: None,
        ..cfg.clone()
    };
    write_json(&out.join("effective_config.json"), &effective)?;

    let mut sink = FileSink::create(&out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    let records = run_training(&mut network, &train, &val, &cfg.train, &mut sink)
        .map_err(|p| CliError::Runtime(p.to_string()))?;
    write_plot_csv(&out.join("plot.csv"), &records).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_json(&out.join("gate_histogram.json"), &gate_histogram_json(&network.gate_histogram()))?;
    let checkpoint = out.join("checkpoint.json");
    save_checkpoint(&checkpoint, &network, Some(&cfg.train), Some(&cfg.dataset), cfg.train.steps)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(TrainReport {
        output_dir: out,
        records,
        checkpoint,
    })
}

fn relax_of(meta: &CheckpointMeta) -> RelaxParams {
    meta.train
        .as_ref()
        .map(|t| t.relax_at(meta.step))
        .unwrap_or_default()
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub accuracy: f64,
    pub examples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub circuit_stats: Option<CircuitStats>,
}

/// Accuracy of a checkpoint on the validation split of `config` (or of the
/// dataset recorded in the checkpoint). Writes `eval_<mode>.json` and, in
/// discrete mode, `circuit_stats.json` into `out`.
pub fn cmd_eval(
    checkpoint: &Path,
    config: Option<&Path>,
    mode: EvalMode,
    out: Option<&Path>,
) -> Result<EvalReport, CliError> {
    let (network, meta) = load_checkpoint(checkpoint).map_err(|e| CliError::Checkpoint(e.to_string()))?;
    let dataset = match config {
        Some(c) => RunConfig::load(c)?.dataset,
        None => meta
            .dataset
            .clone()
            .ok_or_else(|| CliError::Config("checkpoint records no dataset; pass --config".into()))?,
    };
    let (_, val) = load_dataset(&dataset)?;
    let accuracy = evaluate(&network, &val, mode, &relax_of(&meta)).map_err(|e| CliError::Data(e.to_string()))?;
    let circuit_stats = (mode == EvalMode::Discrete).then(|| circuit_stats(&harden(&network)));
    let report = EvalReport {
        mode,
        accuracy,
        examples: val.len(),
        circuit_stats,
    };
    let out = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| checkpoint.parent().unwrap_or(Path::new(".")).to_path_buf());
    fs::create_dir_all(&out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    let name = match mode {
        EvalMode::Relaxed => "eval_relaxed.json",
        EvalMode::Discrete => "eval_discrete.json",
    };
    write_json(&out.join(name), &report)?;
    if let Some(stats) = &report.circuit_stats {
        write_json(&out.join("circuit_stats.json"), stats)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExportReport {
    pub path: PathBuf,
    pub stats: CircuitStats,
    /// Identity nodes removed by folding.
    pub folded: usize,
}

/// Hardens a checkpoint into a netlist file.
pub fn cmd_export(
    checkpoint: &Path,
    format: NetlistFormat,
    fold_identities: bool,
    out: &Path,
) -> Result<ExportReport, CliError> {
    let (network, _) = load_checkpoint(checkpoint).map_err(|e| CliError::Checkpoint(e.to_string()))?;
    let mut netlist = harden(&network);
    let mut folded = 0;
    if fold_identities {
        (netlist, folded) = netlist.fold_identities();
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    }
    write_netlist(out, &netlist, format).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(ExportReport {
        path: out.to_path_buf(),
        stats: circuit_stats(&netlist),
        folded,
    })
}

fn spec_summary(spec: &NetworkSpec) -> Result<serde_json::Value, CliError> {
    let count = |kind| {
        spec.with_node_kind(kind)
            .param_count()
            .map_err(|e| CliError::Config(e.to_string()))
    };
    Ok(json!({
        "input": spec.input,
        "layers": spec.layers.len(),
        "classes": spec.group_sum.classes,
        "param_count_warp": count(NodeKind::Warp)?,
        "param_count_dlgn": count(NodeKind::Dlgn)?,
    }))
}

/// Summary of a checkpoint or an architecture document.
pub fn cmd_inspect(path: &Path) -> Result<serde_json::Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let is_checkpoint = serde_json::from_str::<serde_json::Value>(&text)
        .ok()
        .and_then(|v| v.get("format").cloned())
        .is_some();
    if !is_checkpoint {
        let spec = load_architecture(path)?;
        let mut v = spec_summary(&spec)?;
        let net = Network::build(&spec).map_err(|e| CliError::Config(e.to_string()))?;
        v["node_count"] = net.node_count().into();
        v["param_count"] = net.param_count().into();
        return Ok(v);
    }
    let (network, meta) = load_checkpoint(path).map_err(|e| CliError::Checkpoint(e.to_string()))?;
    let mut v = spec_summary(&meta.architecture)?;
    v["step"] = meta.step.into();
    v["node_count"] = network.node_count().into();
    v["param_count"] = network.param_count().into();
    v["wiring_fingerprint"] = meta.wiring_fingerprint.into();
    v["gate_histogram"] = gate_histogram_json(&network.gate_histogram());
    v["circuit_stats"] = serde_json::to_value(circuit_stats(&harden(&network))).expect("serializable");
    Ok(v)
}

/// Per-class counts of `network` and of its netlist agree on `examples`.
pub fn netlist_matches_model(network: &Network, examples: &[&[u8]]) -> bool {
    let netlist = harden(network);
    let hard = network.harden();
    match netlist_eval(&netlist, examples) {
        Ok(counts) => examples
            .iter()
            .zip(&counts)
            .all(|(x, c)| &network.discrete_counts(&hard, x) == c),
        Err(_) => false,
    }
}
