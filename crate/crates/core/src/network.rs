//! Declarative architecture documents and the assembled network.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boolean::TruthTable;
use crate::layers::{
    GroupSumLayer, InitScheme, LogicDenseLayer, NodeBank, NodeKind, ResidualLogicBlock, Shape, Wiring,
};
use crate::relax::{RelaxMode, RelaxParams};
use crate::rng::{derive, stream};
use crate::{Error, Result};

fn two() -> usize {
    2
}

/// One entry of the architecture's layer list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Dense {
        nodes: usize,
        #[serde(default = "two")]
        arity: usize,
        #[serde(default)]
        node: NodeKind,
        #[serde(default)]
        wiring: Wiring,
        #[serde(default)]
        init: InitScheme,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Conv {
        out_channels: usize,
        depth: usize,
        #[serde(default)]
        node: NodeKind,
        #[serde(default)]
        init: InitScheme,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Flatten,
}

impl LayerSpec {
    pub fn dense(nodes: usize, arity: usize, node: NodeKind, init: InitScheme) -> Self {
        LayerSpec::Dense {
            nodes,
            arity,
            node,
            wiring: Wiring::Random,
            init,
            seed: None,
        }
    }

    fn with_resolved_init(&self) -> Self {
        let mut out = self.clone();
        match &mut out {
            LayerSpec::Dense { node, init, .. } | LayerSpec::Conv { node, init, .. } => {
                *init = init.resolved(*node);
            }
            LayerSpec::Flatten => {}
        }
        out
    }
}

/// Architecture document: input shape, layer list and readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub input: Shape,
    /// Master seed for wiring and initialization; layers may override it.
    #[serde(default)]
    pub seed: u64,
    pub layers: Vec<LayerSpec>,
    pub group_sum: GroupSumLayer,
}

impl NetworkSpec {
    /// Copy with every defaulted init field filled in.
    pub fn resolved(&self) -> Self {
        Self {
            layers: self.layers.iter().map(LayerSpec::with_resolved_init).collect(),
            ..self.clone()
        }
    }

    /// Trainable parameters, computed without building the network.
    pub fn param_count(&self) -> Result<usize> {
        let mut shape = self.input;
        let mut total = 0;
        for layer in &self.layers {
            match *layer {
                LayerSpec::Dense { nodes, arity, node, .. } => {
                    total += nodes * node.params_per_node(arity);
                    shape = Shape::flat(nodes);
                }
                LayerSpec::Conv {
                    out_channels,
                    depth,
                    node,
                    ..
                } => {
                    total += out_channels * (1 << depth) * node.params_per_node(2);
                    shape = Shape::image(out_channels, shape.height / 2, shape.width / 2);
                }
                LayerSpec::Flatten => shape = Shape::flat(shape.dim()),
            }
        }
        self.group_sum.group_size(shape.dim())?;
        Ok(total)
    }

    /// Every layer switched to `kind`.
    pub fn with_node_kind(&self, kind: NodeKind) -> Self {
        let mut out = self.clone();
        for layer in &mut out.layers {
            if let LayerSpec::Dense { node, .. } | LayerSpec::Conv { node, .. } = layer {
                *node = kind;
            }
        }
        out
    }
}

/// A built layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(LogicDenseLayer),
    Conv(ResidualLogicBlock),
    Flatten,
}

impl Layer {
    pub fn bank(&self) -> Option<&NodeBank> {
        match self {
            Layer::Dense(d) => Some(d.bank()),
            Layer::Conv(c) => Some(c.bank()),
            Layer::Flatten => None,
        }
    }

    pub fn bank_mut(&mut self) -> Option<&mut NodeBank> {
        match self {
            Layer::Dense(d) => Some(d.bank_mut()),
            Layer::Conv(c) => Some(c.bank_mut()),
            Layer::Flatten => None,
        }
    }
}

/// Per-example cache of a relaxed forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `acts[i]` is the input of layer `i`; the last entry is the network output.
    acts: Vec<Vec<f64>>,
    pre_pool: Vec<Vec<f64>>,
    noise: Vec<Vec<f64>>,
    grad: Vec<Vec<f64>>,
    mode: RelaxMode,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("at least the input activation")
    }

    /// Noise drawn by layer `layer` in the last forward pass.
    pub fn noise(&self, layer: usize) -> &[f64] {
        &self.noise[layer]
    }
}

/// Parameter gradients, one buffer per layer (empty for parameter-free layers).
pub type Grads = Vec<Vec<f64>>;

/// Hardened snapshot: one exact table per node.
#[derive(Debug, Clone, PartialEq)]
pub struct HardNetwork {
    tables: Vec<Vec<TruthTable>>,
}

impl HardNetwork {
    pub fn layer_tables(&self, layer: usize) -> &[TruthTable] {
        &self.tables[layer]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<Layer>,
    /// `shapes[i]` is the input shape of layer `i`; the last is the output.
    shapes: Vec<Shape>,
}

impl Network {
    /// Builds wiring and initial parameters from an architecture document.
    pub fn build(spec: &NetworkSpec) -> Result<Self> {
        spec.group_sum.validate()?;
        let mut shape = spec.input;
        if shape.dim() == 0 {
            return Err(Error::Config("input dimension must be positive".into()));
        }
        let mut layers = Vec::with_capacity(spec.layers.len());
        let mut shapes = vec![shape];
        for (i, layer_spec) in spec.layers.iter().enumerate() {
            let layer = match layer_spec {
                LayerSpec::Dense {
                    nodes,
                    arity,
                    node,
                    wiring,
                    init,
                    seed,
                } => {
                    let seed = seed.unwrap_or_else(|| derive(spec.seed, i as u64));
                    let mut dense =
                        LogicDenseLayer::new(shape.dim(), *nodes, *arity, *node, wiring, &mut stream(seed, 0))?;
                    dense.bank_mut().init(*init, &mut stream(seed, 1))?;
                    shape = Shape::flat(*nodes);
                    Layer::Dense(dense)
                }
                LayerSpec::Conv {
                    out_channels,
                    depth,
                    node,
                    init,
                    seed,
                } => {
                    let seed = seed.unwrap_or_else(|| derive(spec.seed, i as u64));
                    let mut conv =
                        ResidualLogicBlock::new(shape, *out_channels, *depth, *node, &mut stream(seed, 0))?;
                    conv.bank_mut().init(*init, &mut stream(seed, 1))?;
                    shape = conv.out_shape();
                    Layer::Conv(conv)
                }
                LayerSpec::Flatten => {
                    shape = Shape::flat(shape.dim());
                    Layer::Flatten
                }
            };
            layers.push(layer);
            shapes.push(shape);
        }
        spec.group_sum.group_size(shape.dim())?;
        Ok(Self {
            spec: spec.clone(),
            layers,
            shapes,
        })
    }

    /// Assembles a network from prebuilt layers (used by tests and loaders).
    pub fn from_layers(input: Shape, layers: Vec<Layer>, group_sum: GroupSumLayer) -> Result<Self> {
        let mut shapes = vec![input];
        let mut specs = Vec::new();
        let mut shape = input;
        for layer in &layers {
            match layer {
                Layer::Dense(d) => {
                    if d.in_dim() != shape.dim() {
                        return Err(Error::Dimension {
                            expected: shape.dim(),
                            actual: d.in_dim(),
                        });
                    }
                    let rows = (0..d.node_count()).map(|j| d.node_inputs(j).to_vec()).collect();
                    specs.push(LayerSpec::Dense {
                        nodes: d.node_count(),
                        arity: d.arity(),
                        node: d.bank().kind(),
                        wiring: Wiring::Explicit(rows),
                        init: InitScheme::default(),
                        seed: None,
                    });
                    shape = Shape::flat(d.node_count());
                }
                Layer::Conv(c) => {
                    if c.in_shape() != shape {
                        return Err(Error::Config("conv input shape mismatch".into()));
                    }
                    specs.push(LayerSpec::Conv {
                        out_channels: c.out_channels(),
                        depth: c.depth(),
                        node: c.bank().kind(),
                        init: InitScheme::default(),
                        seed: None,
                    });
                    shape = c.out_shape();
                }
                Layer::Flatten => {
                    specs.push(LayerSpec::Flatten);
                    shape = Shape::flat(shape.dim());
                }
            }
            shapes.push(shape);
        }
        group_sum.validate()?;
        group_sum.group_size(shape.dim())?;
        Ok(Self {
            spec: NetworkSpec {
                input,
                seed: 0,
                layers: specs,
                group_sum,
            },
            layers,
            shapes,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_shape(&self) -> Shape {
        self.shapes[0]
    }

    pub fn input_dim(&self) -> usize {
        self.shapes[0].dim()
    }

    pub fn output_dim(&self) -> usize {
        self.shapes.last().expect("input shape present").dim()
    }

    pub fn layer_input_shape(&self, layer: usize) -> Shape {
        self.shapes[layer]
    }

    pub fn readout(&self) -> &GroupSumLayer {
        &self.spec.group_sum
    }

    pub fn classes(&self) -> usize {
        self.spec.group_sum.classes
    }

    pub fn set_group_tau(&mut self, tau: f64) {
        self.spec.group_sum.tau = tau;
    }

    /// Total trainable parameters.
    pub fn param_count(&self) -> usize {
        self.layers.iter().filter_map(Layer::bank).map(|b| b.params().len()).sum()
    }

    /// Total LUT nodes (conv trees counted once, not per position).
    pub fn node_count(&self) -> usize {
        self.layers.iter().filter_map(Layer::bank).map(NodeBank::node_count).sum()
    }

    /// Catalog histogram of all hardened 2-input nodes.
    pub fn gate_histogram(&self) -> [u64; 16] {
        let mut hist = [0u64; 16];
        for bank in self.layers.iter().filter_map(Layer::bank) {
            for (h, c) in hist.iter_mut().zip(bank.gate_histogram()) {
                *h += c;
            }
        }
        hist
    }

    /// Largest absolute parameter per layer (0 for parameter-free layers).
    pub fn max_abs_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .map(|l| {
                l.bank()
                    .map(|b| b.params().iter().fold(0.0f64, |m, v| if m.is_nan() || v.is_nan() { f64::NAN } else { m.max(v.abs()) }))
                    .unwrap_or(0.0)
            })
            .collect()
    }

    /// Rounds every parameter to the nearest `f32`.
    pub fn round_params_to_f32(&mut self) {
        for bank in self.layers.iter_mut().filter_map(Layer::bank_mut) {
            for p in bank.params_mut() {
                *p = *p as f32 as f64;
            }
        }
    }

    /// All parameters concatenated in layer order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .filter_map(Layer::bank)
            .flat_map(|b| b.params().iter().copied())
            .collect()
    }

    /// Overwrites all parameters from a layer-ordered flat vector.
    pub fn load_flat_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Length {
                expected: self.param_count(),
                actual: values.len(),
            });
        }
        let mut offset = 0;
        for bank in self.layers.iter_mut().filter_map(Layer::bank_mut) {
            let p = bank.params_mut();
            p.copy_from_slice(&values[offset..offset + p.len()]);
            offset += p.len();
        }
        Ok(())
    }

    /// SHA-256 over shapes and wiring (not parameters), as lowercase hex.
    pub fn wiring_fingerprint(&self) -> String {
        let mut h = Sha256::new();
        let put = |h: &mut Sha256, v: u64| h.update(v.to_le_bytes());
        for s in &self.shapes {
            put(&mut h, s.channels as u64);
            put(&mut h, s.height as u64);
            put(&mut h, s.width as u64);
        }
        for layer in &self.layers {
            match layer {
                Layer::Dense(d) => {
                    put(&mut h, 1);
                    put(&mut h, d.arity() as u64);
                    put(&mut h, d.bank().kind() as u64);
                    for &c in d.connections() {
                        put(&mut h, c as u64);
                    }
                }
                Layer::Conv(c) => {
                    put(&mut h, 2);
                    put(&mut h, c.depth() as u64);
                    put(&mut h, c.bank().kind() as u64);
                    for l in c.leaves() {
                        put(&mut h, l.channel as u64);
                        put(&mut h, (l.dr as i64) as u64);
                        put(&mut h, (l.dc as i64) as u64);
                    }
                }
                Layer::Flatten => put(&mut h, 3),
            }
        }
        put(&mut h, self.classes() as u64);
        let digest = h.finalize();
        let mut out = String::with_capacity(64);
        for b in digest.iter() {
            let _ = write!(out, "{b:02x}");
        }
        out
    }

    pub fn zero_grads(&self) -> Grads {
        self.layers
            .iter()
            .map(|l| l.bank().map(|b| vec![0.0; b.params().len()]).unwrap_or_default())
            .collect()
    }

    /// Allocates a forward cache sized for `mode`.
    pub fn new_trace(&self, mode: RelaxMode, relax: &RelaxParams) -> Trace {
        let noisy = mode.samples_noise(relax);
        let mut pre_pool = Vec::new();
        let mut noise = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let (pre, nz) = match layer {
                Layer::Dense(d) => (0, if noisy { d.node_count() } else { 0 }),
                Layer::Conv(c) => {
                    let s = self.shapes[i];
                    let positions = c.out_channels() * s.height * s.width;
                    (positions, if noisy { positions * c.nodes_per_tree() } else { 0 })
                }
                Layer::Flatten => (0, 0),
            };
            pre_pool.push(vec![0.0; pre]);
            noise.push(vec![0.0; nz]);
        }
        Trace {
            acts: self.shapes.iter().map(|s| vec![0.0; s.dim()]).collect(),
            grad: self.shapes.iter().map(|s| vec![0.0; s.dim()]).collect(),
            pre_pool,
            noise,
            mode,
        }
    }

    /// Relaxed forward of one example; the output is `trace.output()`.
    pub fn forward_example<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        relax: &RelaxParams,
        rng: &mut R,
        trace: &mut Trace,
    ) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        let mode = trace.mode;
        trace.acts[0].copy_from_slice(x);
        for (i, layer) in self.layers.iter().enumerate() {
            let (done, rest) = trace.acts.split_at_mut(i + 1);
            let input = &done[i];
            let out = &mut rest[0];
            match layer {
                Layer::Dense(d) => d.forward_example(input, mode, relax, rng, out, &mut trace.noise[i]),
                Layer::Conv(c) => c.forward_example(
                    input,
                    mode,
                    relax,
                    rng,
                    out,
                    &mut trace.pre_pool[i],
                    &mut trace.noise[i],
                ),
                Layer::Flatten => out.copy_from_slice(input),
            }
        }
        Ok(())
    }

    /// Backpropagates `grad_out` (gradient w.r.t. the network output) through
    /// the cached forward pass, accumulating into `grads`.
    pub fn backward_example(
        &self,
        trace: &mut Trace,
        grad_out: &[f64],
        relax: &RelaxParams,
        grads: &mut Grads,
    ) -> Result<()> {
        let last = self.layers.len();
        if grad_out.len() != self.output_dim() {
            return Err(Error::Dimension {
                expected: self.output_dim(),
                actual: grad_out.len(),
            });
        }
        let mode = trace.mode;
        trace.grad[last].copy_from_slice(grad_out);
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (below, above) = trace.grad.split_at_mut(i + 1);
            let gin = &mut below[i];
            let gout = &above[0];
            gin.fill(0.0);
            let x = &trace.acts[i];
            match layer {
                Layer::Dense(d) => d.backward_example(x, &trace.noise[i], gout, mode, relax, &mut grads[i], gin),
                Layer::Conv(c) => c.backward_example(
                    x,
                    &trace.pre_pool[i],
                    &trace.noise[i],
                    gout,
                    mode,
                    relax,
                    &mut grads[i],
                    gin,
                ),
                Layer::Flatten => gin.copy_from_slice(gout),
            }
        }
        Ok(())
    }

    /// Gradient with respect to the input of the last backward pass.
    pub fn input_grad<'a>(&self, trace: &'a Trace) -> &'a [f64] {
        &trace.grad[0]
    }

    /// Class scores of a network output.
    pub fn scores(&self, output: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.classes()];
        self.readout().forward_into(output, &mut s);
        s
    }

    pub(crate) fn scores_backward(&self, grad_scores: &[f64], grad_out: &mut [f64]) {
        self.readout().backward_into(grad_scores, grad_out);
    }

    /// Snapshot of every node hardened to its nearest table.
    pub fn harden(&self) -> HardNetwork {
        HardNetwork {
            tables: self
                .layers
                .iter()
                .map(|l| l.bank().map(NodeBank::harden_all).unwrap_or_default())
                .collect(),
        }
    }

    /// Boolean forward of one example through a hardened snapshot.
    pub fn discrete_forward(&self, hard: &HardNetwork, x: &[u8]) -> Vec<u8> {
        let mut cur = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut next = vec![0u8; self.shapes[i + 1].dim()];
            match layer {
                Layer::Dense(d) => d.discrete_example(&hard.tables[i], &cur, &mut next),
                Layer::Conv(c) => c.discrete_example(&hard.tables[i], &cur, &mut next),
                Layer::Flatten => next.copy_from_slice(&cur),
            }
            cur = next;
        }
        cur
    }

    /// Integer GroupSum counts of one example.
    pub fn discrete_counts(&self, hard: &HardNetwork, x: &[u8]) -> Vec<u32> {
        let out = self.discrete_forward(hard, x);
        let mut counts = vec![0; self.classes()];
        self.readout().counts_into(&out, &mut counts);
        counts
    }
}

/// Trainable parameters of a built network.
pub fn param_count(network: &Network) -> usize {
    network.param_count()
}
