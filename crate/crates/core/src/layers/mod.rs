//! Network layers: dense LUT banks, the residual convolutional logic block and
//! the GroupSum readout, plus wiring and initialization.

pub(crate) mod conv;
mod dense;
mod group_sum;

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boolean::{classify_gate, nearest_table_from_slice, GateId, TruthTable, MAX_ARITY};
use crate::dlgn::{self, DLGN_PARAMS};
use crate::relax::{self, NodeForward, RelaxMode, RelaxParams};
use crate::rng::normal;
use crate::{Error, Result};

pub use conv::{conv_forward, Leaf, ResidualLogicBlock};
pub use dense::{dense_forward, make_connections, LogicDenseLayer};
pub use group_sum::{group_sum, GroupSumLayer};

/// Parameterization of the nodes in a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    /// `2^n` Walsh coefficients per node.
    #[default]
    Warp,
    /// Sixteen gate logits per 2-input node.
    Dlgn,
}

impl NodeKind {
    pub fn params_per_node(self, arity: usize) -> usize {
        match self {
            NodeKind::Warp => 1 << arity,
            NodeKind::Dlgn => DLGN_PARAMS,
        }
    }
}

/// Parameter initialization. Unset fields take the node kind's defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitScheme {
    Random {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
    },
    Residual {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
    },
}

impl Default for InitScheme {
    fn default() -> Self {
        InitScheme::Random { sigma: None }
    }
}

impl InitScheme {
    pub fn random(sigma: f64) -> Self {
        InitScheme::Random { sigma: Some(sigma) }
    }

    pub fn residual(gamma: f64, sigma: f64) -> Self {
        InitScheme::Residual {
            gamma: Some(gamma),
            sigma: Some(sigma),
        }
    }

    /// Fills unset fields with the defaults for `kind`.
    pub fn resolved(self, kind: NodeKind) -> Self {
        match (self, kind) {
            (InitScheme::Random { sigma }, _) => InitScheme::random(sigma.unwrap_or(1.0)),
            (InitScheme::Residual { gamma, sigma }, NodeKind::Warp) => {
                InitScheme::residual(gamma.unwrap_or(1.0), sigma.unwrap_or(0.25))
            }
            (InitScheme::Residual { gamma, sigma }, NodeKind::Dlgn) => {
                InitScheme::residual(gamma.unwrap_or(5.0), sigma.unwrap_or(1.0))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (gamma, sigma) = match *self {
            InitScheme::Random { sigma } => (None, sigma),
            InitScheme::Residual { gamma, sigma } => (gamma, sigma),
        };
        if sigma.is_some_and(|s| !(s >= 0.0 && s.is_finite())) {
            return Err(Error::Config(alloc::format!("init sigma must be >= 0, got {sigma:?}")));
        }
        if gamma.is_some_and(|g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::Config(alloc::format!("init gamma must be > 0, got {gamma:?}")));
        }
        Ok(())
    }
}

/// How dense-layer inputs are chosen.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wiring {
    /// `arity` distinct inputs per node, drawn uniformly.
    #[default]
    Random,
    /// Input 0 of node `j` is `j mod in_dim`; the rest are random and distinct.
    Aligned,
    /// Fixed connection list, one row per node.
    Explicit(Vec<Vec<u32>>),
}

/// Channel-major activation shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shape {
    pub channels: usize,
    #[serde(default = "one")]
    pub height: usize,
    #[serde(default = "one")]
    pub width: usize,
}

fn one() -> usize {
    1
}

impl Shape {
    pub fn flat(dim: usize) -> Self {
        Self {
            channels: dim,
            height: 1,
            width: 1,
        }
    }

    pub fn image(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub fn dim(&self) -> usize {
        self.channels * self.height * self.width
    }
}

/// Parameters of a bank of same-kind, same-arity nodes, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeBank {
    kind: NodeKind,
    arity: usize,
    params: Vec<f64>,
}

impl NodeBank {
    pub fn new(kind: NodeKind, arity: usize, node_count: usize) -> Result<Self> {
        if !(1..=MAX_ARITY).contains(&arity) {
            return Err(Error::Arity(arity));
        }
        if kind == NodeKind::Dlgn && arity != 2 {
            return Err(Error::Config(alloc::format!(
                "dlgn nodes are 2-input, got arity {arity}"
            )));
        }
        Ok(Self {
            kind,
            arity,
            params: vec![0.0; node_count * kind.params_per_node(arity)],
        })
    }

    pub fn kind(&self) -> NodeKind {
        self.kind
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn params_per_node(&self) -> usize {
        self.kind.params_per_node(self.arity)
    }

    pub fn node_count(&self) -> usize {
        self.params.len() / self.params_per_node()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    #[inline]
    pub fn node_params(&self, node: usize) -> &[f64] {
        let p = self.params_per_node();
        &self.params[node * p..(node + 1) * p]
    }

    #[inline]
    pub(crate) fn forward<R: Rng + ?Sized>(
        &self,
        node: usize,
        x: &[f64],
        mode: RelaxMode,
        relax: &RelaxParams,
        rng: &mut R,
    ) -> NodeForward {
        let p = self.node_params(node);
        match self.kind {
            NodeKind::Warp => relax::activate(relax::logit_slice(p, x), mode, relax, rng),
            NodeKind::Dlgn => dlgn::forward_slice(p, x, mode, DLGN_TEMPERATURE),
        }
    }

    /// Forward pass that replays a recorded noise draw.
    #[inline]
    pub(crate) fn forward_with_noise(
        &self,
        node: usize,
        x: &[f64],
        mode: RelaxMode,
        relax: &RelaxParams,
        noise: f64,
    ) -> NodeForward {
        let p = self.node_params(node);
        match self.kind {
            NodeKind::Warp => relax::activate_with_noise(relax::logit_slice(p, x), mode, relax, noise),
            NodeKind::Dlgn => dlgn::forward_slice(p, x, mode, DLGN_TEMPERATURE),
        }
    }

    #[inline]
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn backward(
        &self,
        node: usize,
        x: &[f64],
        upstream: f64,
        mode: RelaxMode,
        relax: &RelaxParams,
        noise: f64,
        grad_params: &mut [f64],
        grad_x: &mut [f64],
    ) {
        let ppn = self.params_per_node();
        let p = self.node_params(node);
        let gp = &mut grad_params[node * ppn..(node + 1) * ppn];
        match self.kind {
            NodeKind::Warp => relax::backward_slice(p, x, upstream, mode, relax, noise, gp, grad_x),
            NodeKind::Dlgn => dlgn::backward_slice(p, x, upstream, DLGN_TEMPERATURE, gp, grad_x),
        }
    }

    /// Exact table of `node` after hardening.
    pub fn harden(&self, node: usize) -> TruthTable {
        let p = self.node_params(node);
        match self.kind {
            NodeKind::Warp => nearest_table_from_slice(p),
            NodeKind::Dlgn => dlgn::harden_slice(p).table(),
        }
    }

    pub fn harden_all(&self) -> Vec<TruthTable> {
        (0..self.node_count()).map(|j| self.harden(j)).collect()
    }

    /// Writes fresh parameters according to `scheme`.
    pub fn init<R: Rng + ?Sized>(&mut self, scheme: InitScheme, rng: &mut R) -> Result<()> {
        scheme.validate()?;
        let ppn = self.params_per_node();
        let (gamma, sigma) = match scheme.resolved(self.kind) {
            InitScheme::Random { sigma } => (0.0, sigma.unwrap_or_default()),
            InitScheme::Residual { gamma, sigma } => (gamma.unwrap_or_default(), sigma.unwrap_or_default()),
        };
        // Coefficient 1 is the subset {input 0}; catalog entry ID_A otherwise.
        let identity_slot = match self.kind {
            NodeKind::Warp => 1,
            NodeKind::Dlgn => GateId::ID_A.index(),
        };
        for row in self.params.chunks_mut(ppn) {
            for v in row.iter_mut() {
                *v = normal(rng, sigma);
            }
            row[identity_slot] += gamma;
        }
        Ok(())
    }

    /// Catalog histogram of the hardened 2-input nodes.
    pub fn gate_histogram(&self) -> [u64; 16] {
        let mut hist = [0u64; 16];
        if self.arity == 2 {
            for j in 0..self.node_count() {
                let id = classify_gate(&self.harden(j)).expect("arity checked");
                hist[id.index()] += 1;
            }
        }
        hist
    }
}

/// Softmax temperature of the baseline nodes.
pub const DLGN_TEMPERATURE: f64 = 1.0;

/// Applies `scheme` to every node of `bank`.
pub fn init_layer<R: Rng + ?Sized>(bank: &mut NodeBank, scheme: InitScheme, rng: &mut R) -> Result<()> {
    bank.init(scheme, rng)
}
