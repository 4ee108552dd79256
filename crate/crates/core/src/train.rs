//! Training loop, dual-mode evaluation and metrics.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::loss::cross_entropy_example;
use crate::math::argmax;
use crate::network::{Grads, Network};
use crate::optim::{Optimizer, OptimizerConfig};
use crate::relax::{RelaxMode, RelaxParams};
use crate::rng::{derive, example_stream, stream};
use crate::{Error, Result};

/// Examples per gradient partition. Partial sums are always formed over the
/// same partitions and reduced in order, so gradients are reproducible.
const PARTITION: usize = 8;

const BATCH_SALT: u64 = 0xB47C_0000;

/// Linear schedule for the relaxation temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauSchedule {
    pub start: f64,
    /// Temperature reached at the last step; equal to `start` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<f64>,
}

impl TauSchedule {
    pub fn constant(tau: f64) -> Self {
        Self { start: tau, end: None }
    }

    pub fn at(&self, step: u64, steps: u64) -> f64 {
        match self.end {
            None => self.start,
            Some(end) if steps <= 1 => end,
            Some(end) => {
                let f = step.min(steps - 1) as f64 / (steps - 1) as f64;
                self.start + (end - self.start) * f
            }
        }
    }
}

impl Default for TauSchedule {
    fn default() -> Self {
        Self::constant(1.0)
    }
}

fn default_lr() -> f64 {
    0.01
}

fn default_eval_every() -> u64 {
    500
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: u64,
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_eval_every")]
    pub eval_every: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: RelaxMode,
    #[serde(default)]
    pub tau_relax: TauSchedule,
    /// Overrides the architecture's GroupSum temperature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_group: Option<f64>,
    /// Straight-through forward samples logistic noise.
    #[serde(default)]
    pub gumbel_enabled: bool,
    /// Straight-through backward uses the noisy soft value.
    #[serde(default)]
    pub ste_noisy_backward: bool,
    /// Round parameters to `f32` before the final evaluation so the last
    /// record describes exactly what a checkpoint stores.
    #[serde(default = "default_true")]
    pub round_final_to_f32: bool,
}

impl TrainConfig {
    pub fn new(steps: u64, batch_size: usize) -> Self {
        Self {
            steps,
            batch_size,
            learning_rate: default_lr(),
            optimizer: OptimizerConfig::default(),
            eval_every: default_eval_every(),
            seed: 0,
            mode: RelaxMode::Deterministic,
            tau_relax: TauSchedule::default(),
            tau_group: None,
            gumbel_enabled: false,
            ste_noisy_backward: false,
            round_final_to_f32: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.eval_every == 0 || self.batch_size == 0 {
            return Err(Error::Config("steps, eval_every and batch_size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be finite and >= 0".into()));
        }
        self.relax_at(0).validate()?;
        self.relax_at(self.steps).validate()?;
        if let Some(t) = self.tau_group {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config("tau_group must be > 0".into()));
            }
        }
        Ok(())
    }

    /// Relaxation parameters in effect at `step`.
    pub fn relax_at(&self, step: u64) -> RelaxParams {
        RelaxParams {
            tau_relax: self.tau_relax.at(step, self.steps),
            gumbel_enabled: self.gumbel_enabled,
            ste_noisy_backward: self.ste_noisy_backward,
            rng_seed: self.seed,
        }
    }
}

/// One evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    /// Mean training loss since the previous record.
    pub train_loss: f64,
    pub val_acc_relaxed: f64,
    pub val_acc_discrete: f64,
    /// `val_acc_relaxed - val_acc_discrete`.
    pub discretization_gap: f64,
    pub gate_histogram: [u64; 16],
}

/// Evaluation modes of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Noise-free sigmoid forward, argmax of GroupSum scores.
    Relaxed,
    /// Every node hardened, Boolean forward, argmax of integer group counts.
    Discrete,
}

/// Receives metrics as they are produced.
pub trait MetricsSink {
    fn record(&mut self, record: &MetricsRecord) -> core::result::Result<(), String>;
}

impl MetricsSink for Vec<MetricsRecord> {
    fn record(&mut self, record: &MetricsRecord) -> core::result::Result<(), String> {
        self.push(record.clone());
        Ok(())
    }
}

/// Discards records.
pub struct NullSink;

impl MetricsSink for NullSink {
    fn record(&mut self, _: &MetricsRecord) -> core::result::Result<(), String> {
        Ok(())
    }
}

/// A training run that stopped early, with the records produced so far.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialRun {
    pub records: Vec<MetricsRecord>,
    pub error: Error,
}

impl core::fmt::Display for PartialRun {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{} (after {} metrics records)", self.error, self.records.len())
    }
}

fn to_f64(bits: &[u8], out: &mut [f64]) {
    for (o, &b) in out.iter_mut().zip(bits) {
        *o = b as f64;
    }
}

/// Loss and summed gradients over one partition of a batch.
#[allow(clippy::too_many_arguments)]
fn partition_gradients(
    network: &Network,
    data: &Dataset,
    batch: &[usize],
    first_slot: usize,
    mode: RelaxMode,
    relax: &RelaxParams,
    seed: u64,
    step: u64,
) -> Result<(f64, Grads)> {
    let mut grads = network.zero_grads();
    let mut trace = network.new_trace(mode, relax);
    let mut x = vec![0.0; network.input_dim()];
    let mut grad_scores = vec![0.0; network.classes()];
    let mut grad_out = vec![0.0; network.output_dim()];
    let mut loss = 0.0;
    for (k, &i) in batch.iter().enumerate() {
        to_f64(data.example(i), &mut x);
        let mut rng = example_stream(seed, step, (first_slot + k) as u64);
        network.forward_example(&x, relax, &mut rng, &mut trace)?;
        let scores = network.scores(trace.output());
        loss += cross_entropy_example(&scores, data.label(i), &mut grad_scores)?;
        network.scores_backward(&grad_scores, &mut grad_out);
        network.backward_example(&mut trace, &grad_out, relax, &mut grads)?;
    }
    Ok((loss, grads))
}

/// Mean loss and gradient of the batch `batch` (indices into `data`).
pub fn batch_gradients(
    network: &Network,
    data: &Dataset,
    batch: &[usize],
    mode: RelaxMode,
    relax: &RelaxParams,
    seed: u64,
    step: u64,
) -> Result<(f64, Grads)> {
    let parts: Vec<(usize, &[usize])> = batch
        .chunks(PARTITION)
        .enumerate()
        .map(|(p, c)| (p * PARTITION, c))
        .collect();
    let run = |&(first, part): &(usize, &[usize])| {
        partition_gradients(network, data, part, first, mode, relax, seed, step)
    };
    #[cfg(feature = "parallel")]
    let results: Vec<Result<(f64, Grads)>> = {
        use rayon::prelude::*;
        parts.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<(f64, Grads)>> = parts.iter().map(run).collect();

    let mut total_loss = 0.0;
    let mut grads = network.zero_grads();
    for r in results {
        let (l, g) = r?;
        total_loss += l;
        for (acc, part) in grads.iter_mut().zip(&g) {
            for (a, p) in acc.iter_mut().zip(part) {
                *a += p;
            }
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for g in grads.iter_mut().flatten() {
        *g *= scale;
    }
    Ok((total_loss * scale, grads))
}

/// Batch indices drawn for `step`.
pub fn sample_batch(n: usize, batch_size: usize, seed: u64, step: u64) -> Vec<usize> {
    if batch_size >= n {
        return (0..n).collect();
    }
    index::sample(&mut stream(derive(seed ^ BATCH_SALT, step), 0), n, batch_size).into_vec()
}

fn divergence(network: &Network, step: u64) -> Error {
    let maxes = network.max_abs_params();
    let layer = (0..maxes.len())
        .find(|&i| maxes[i].is_nan())
        .unwrap_or_else(|| argmax(&maxes));
    Error::Diverged {
        step,
        layer,
        max_abs_coeff: maxes.get(layer).copied().unwrap_or(0.0),
    }
}

/// One forward, one backward and one optimizer update on `batch`.
pub fn train_step(
    network: &mut Network,
    optimizer: &mut Optimizer,
    data: &Dataset,
    batch: &[usize],
    config: &TrainConfig,
    step: u64,
) -> Result<f64> {
    let relax = config.relax_at(step);
    let (loss, grads) = batch_gradients(network, data, batch, config.mode, &relax, config.seed, step)?;
    if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
        return Err(divergence(network, step));
    }
    optimizer.step_network(network, &grads, config.learning_rate);
    Ok(loss)
}

fn count_correct(network: &Network, data: &Dataset, range: core::ops::Range<usize>, mode: EvalMode, relax: &RelaxParams) -> usize {
    match mode {
        EvalMode::Relaxed => {
            let mut trace = network.new_trace(RelaxMode::Deterministic, relax);
            let mut x = vec![0.0; network.input_dim()];
            // no noise is drawn in deterministic mode
            let mut rng = stream(0, 0);
            range
                .filter(|&i| {
                    to_f64(data.example(i), &mut x);
                    network
                        .forward_example(&x, relax, &mut rng, &mut trace)
                        .expect("dataset dims checked");
                    argmax(&network.scores(trace.output())) == data.label(i)
                })
                .count()
        }
        EvalMode::Discrete => {
            let hard = network.harden();
            range
                .filter(|&i| argmax(&network.discrete_counts(&hard, data.example(i))) == data.label(i))
                .count()
        }
    }
}

/// Accuracy of `network` on `data`. Never mutates the network.
pub fn evaluate(network: &Network, data: &Dataset, mode: EvalMode, relax: &RelaxParams) -> Result<f64> {
    if data.dim() != network.input_dim() {
        return Err(Error::Dimension {
            expected: network.input_dim(),
            actual: data.dim(),
        });
    }
    if data.is_empty() {
        return Ok(0.0);
    }
    let blocks: Vec<core::ops::Range<usize>> = (0..data.len())
        .step_by(256)
        .map(|s| s..(s + 256).min(data.len()))
        .collect();
    #[cfg(feature = "parallel")]
    let correct: usize = {
        use rayon::prelude::*;
        blocks
            .into_par_iter()
            .map(|r| count_correct(network, data, r, mode, relax))
            .sum()
    };
    #[cfg(not(feature = "parallel"))]
    let correct: usize = blocks
        .into_iter()
        .map(|r| count_correct(network, data, r, mode, relax))
        .sum();
    Ok(correct as f64 / data.len() as f64)
}

/// Catalog histogram of the hardened 2-input nodes of `network`.
pub fn gate_histogram(network: &Network) -> [u64; 16] {
    network.gate_histogram()
}

fn make_record(network: &Network, val: &Dataset, relax: &RelaxParams, step: u64, train_loss: f64) -> Result<MetricsRecord> {
    let relaxed = evaluate(network, val, EvalMode::Relaxed, relax)?;
    let discrete = evaluate(network, val, EvalMode::Discrete, relax)?;
    Ok(MetricsRecord {
        step,
        train_loss,
        val_acc_relaxed: relaxed,
        val_acc_discrete: discrete,
        discretization_gap: relaxed - discrete,
        gate_histogram: network.gate_histogram(),
    })
}

/// Trains for `config.steps` steps, appending a record every `eval_every`
/// steps and after the final step.
pub fn run_training(
    network: &mut Network,
    train: &Dataset,
    val: &Dataset,
    config: &TrainConfig,
    sink: &mut dyn MetricsSink,
) -> core::result::Result<Vec<MetricsRecord>, PartialRun> {
    let mut records = Vec::new();
    macro_rules! bail {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(error) => return Err(PartialRun { records, error }),
            }
        };
    }
    bail!(config.validate());
    if let Some(t) = config.tau_group {
        network.set_group_tau(t);
    }
    for ds in [train, val] {
        if ds.dim() != network.input_dim() {
            bail!(Err(Error::Dimension {
                expected: network.input_dim(),
                actual: ds.dim(),
            }));
        }
        if ds.classes() != network.classes() {
            bail!(Err(Error::Config(alloc::format!(
                "dataset has {} classes, network {}",
                ds.classes(),
                network.classes()
            ))));
        }
    }
    if train.is_empty() {
        bail!(Err(Error::Config("training set is empty".to_string())));
    }
    let mut optimizer = Optimizer::for_network(config.optimizer, network);
    let (mut loss_sum, mut loss_count) = (0.0, 0u64);
    for step in 1..=config.steps {
        let batch = sample_batch(train.len(), config.batch_size, config.seed, step);
        let loss = bail!(train_step(network, &mut optimizer, train, &batch, config, step));
        loss_sum += loss;
        loss_count += 1;
        if step % config.eval_every == 0 || step == config.steps {
            if step == config.steps && config.round_final_to_f32 {
                network.round_params_to_f32();
            }
            let record = bail!(make_record(network, val, &config.relax_at(step), step, loss_sum / loss_count as f64));
            (loss_sum, loss_count) = (0.0, 0);
            bail!(sink.record(&record).map_err(Error::Sink));
            records.push(record);
        }
    }
    Ok(records)
}
