//! Exact Boolean netlists of hardened networks, a bit-parallel evaluator and
//! circuit statistics.
//!
//! Wire ids are dense: inputs first, then constant wires, then one wire per
//! node in topological order.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;
use core::ops::{BitAnd, BitOr, BitXor, Not};

use serde::{Deserialize, Serialize};

use crate::boolean::{classify_gate, GateId, TruthTable};
use crate::layers::conv::TreeInput;
use crate::math::argmax;
use crate::network::{Layer, Network};
use crate::{Error, Result};

/// Table of the 4-input OR used for discrete 2×2 pooling.
const OR4_BITS: u64 = 0xFFFE;

/// Position of a netlist node in the source model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeOrigin {
    pub layer: u32,
    /// Index into the layer's node bank. Conv instances share it.
    pub node: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetNode {
    pub table: TruthTable,
    pub inputs: Vec<u32>,
    /// `None` for structural nodes such as pooling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<NodeOrigin>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NetlistMeta {
    /// Wiring fingerprint of the source model, empty when built by hand.
    pub architecture_hash: String,
    pub class_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct RawNetlist {
    input_names: Vec<String>,
    #[serde(default)]
    constants: Vec<bool>,
    nodes: Vec<NetNode>,
    outputs: Vec<Vec<u32>>,
    meta: NetlistMeta,
}

/// Immutable, validated netlist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawNetlist", into = "RawNetlist")]
pub struct Netlist {
    raw: RawNetlist,
}

impl TryFrom<RawNetlist> for Netlist {
    type Error = Error;

    fn try_from(raw: RawNetlist) -> Result<Self> {
        let first_node = raw.input_names.len() + raw.constants.len();
        for (k, node) in raw.nodes.iter().enumerate() {
            let wire = first_node + k;
            if node.inputs.len() != node.table.arity() {
                return Err(Error::Netlist(format!(
                    "node w{wire} has {} inputs for an arity-{} table",
                    node.inputs.len(),
                    node.table.arity()
                )));
            }
            if let Some(&bad) = node.inputs.iter().find(|&&i| i as usize >= wire) {
                return Err(Error::Netlist(format!("node w{wire} reads w{bad} before it is defined")));
            }
        }
        let wires = first_node + raw.nodes.len();
        if raw.outputs.len() != raw.meta.class_count || raw.outputs.is_empty() {
            return Err(Error::Netlist(format!(
                "{} output groups for {} classes",
                raw.outputs.len(),
                raw.meta.class_count
            )));
        }
        let size = raw.outputs[0].len();
        for group in &raw.outputs {
            if group.len() != size {
                return Err(Error::Netlist("output groups differ in size".into()));
            }
            if let Some(&bad) = group.iter().find(|&&w| w as usize >= wires) {
                return Err(Error::Netlist(format!("output w{bad} does not exist")));
            }
        }
        Ok(Self { raw })
    }
}

impl From<Netlist> for RawNetlist {
    fn from(n: Netlist) -> Self {
        n.raw
    }
}

impl Netlist {
    /// Builds and validates a netlist.
    pub fn new(
        input_names: Vec<String>,
        constants: Vec<bool>,
        nodes: Vec<NetNode>,
        outputs: Vec<Vec<u32>>,
        meta: NetlistMeta,
    ) -> Result<Self> {
        RawNetlist {
            input_names,
            constants,
            nodes,
            outputs,
            meta,
        }
        .try_into()
    }

    pub fn input_count(&self) -> usize {
        self.raw.input_names.len()
    }

    pub fn input_names(&self) -> &[String] {
        &self.raw.input_names
    }

    pub fn constants(&self) -> &[bool] {
        &self.raw.constants
    }

    pub fn nodes(&self) -> &[NetNode] {
        &self.raw.nodes
    }

    pub fn outputs(&self) -> &[Vec<u32>] {
        &self.raw.outputs
    }

    pub fn meta(&self) -> &NetlistMeta {
        &self.raw.meta
    }

    pub fn class_count(&self) -> usize {
        self.raw.meta.class_count
    }

    /// Wire id of the first node.
    pub fn first_node_wire(&self) -> usize {
        self.input_count() + self.raw.constants.len()
    }

    pub fn wire_count(&self) -> usize {
        self.first_node_wire() + self.raw.nodes.len()
    }

    /// Evaluates one block of `W::BITS` examples. `inputs[i]` packs input
    /// wire `i`; bit `k` of every word belongs to example `k`. Returns one
    /// word per wire.
    pub fn eval_words<W: Word>(&self, inputs: &[W]) -> Result<Vec<W>> {
        if inputs.len() != self.input_count() {
            return Err(Error::Dimension {
                expected: self.input_count(),
                actual: inputs.len(),
            });
        }
        let mut wires = Vec::with_capacity(self.wire_count());
        wires.extend_from_slice(inputs);
        wires.extend(self.raw.constants.iter().map(|&c| if c { W::ONES } else { W::ZERO }));
        let mut args = [W::ZERO; crate::boolean::MAX_ARITY];
        for node in &self.raw.nodes {
            for (a, &i) in args.iter_mut().zip(&node.inputs) {
                *a = wires[i as usize];
            }
            wires.push(eval_table(node.table, &args[..node.inputs.len()]));
        }
        Ok(wires)
    }

    /// Per-class popcounts for `examples` examples packed `W::BITS` per
    /// word. `inputs[i][b]` is word block `b` of input wire `i`.
    pub fn class_counts<W: Word>(&self, inputs: &[Vec<W>], examples: usize) -> Result<Vec<Vec<u32>>> {
        if inputs.len() != self.input_count() {
            return Err(Error::Dimension {
                expected: self.input_count(),
                actual: inputs.len(),
            });
        }
        let blocks = examples.div_ceil(W::BITS);
        if let Some(bad) = inputs.iter().find(|s| s.len() < blocks) {
            return Err(Error::Length {
                expected: blocks,
                actual: bad.len(),
            });
        }
        let mut counts = vec![vec![0u32; self.class_count()]; examples];
        let mut block_in = vec![W::ZERO; self.input_count()];
        for b in 0..blocks {
            for (dst, src) in block_in.iter_mut().zip(inputs) {
                *dst = src[b];
            }
            let wires = self.eval_words(&block_in)?;
            let lanes = (examples - b * W::BITS).min(W::BITS);
            for (class, group) in self.raw.outputs.iter().enumerate() {
                for &w in group {
                    let word = wires[w as usize];
                    for lane in 0..lanes {
                        counts[b * W::BITS + lane][class] += word.bit(lane) as u32;
                    }
                }
            }
        }
        Ok(counts)
    }

    /// Argmax class per example, lowest index on ties.
    pub fn predict<W: Word>(&self, inputs: &[Vec<W>], examples: usize) -> Result<Vec<usize>> {
        Ok(self
            .class_counts(inputs, examples)?
            .iter()
            .map(|c| {
                let f: Vec<f64> = c.iter().map(|&v| v as f64).collect();
                argmax(&f)
            })
            .collect())
    }

    /// Removes 2-input identity nodes by rewiring their readers to the
    /// selected input. Returns the folded netlist and the number removed.
    pub fn fold_identities(&self) -> (Netlist, usize) {
        let first = self.first_node_wire();
        let mut remap: Vec<u32> = (0..self.wire_count() as u32).collect();
        let mut nodes = Vec::new();
        let mut removed = 0;
        for (k, node) in self.raw.nodes.iter().enumerate() {
            let inputs: Vec<u32> = node.inputs.iter().map(|&i| remap[i as usize]).collect();
            let pick = match classify_gate(&node.table) {
                Ok(GateId::ID_A) => Some(inputs[0]),
                Ok(GateId::ID_B) => Some(inputs[1]),
                _ => None,
            };
            match pick {
                Some(src) => {
                    remap[first + k] = src;
                    removed += 1;
                }
                None => {
                    remap[first + k] = (first + nodes.len()) as u32;
                    nodes.push(NetNode {
                        table: node.table,
                        inputs,
                        origin: node.origin,
                    });
                }
            }
        }
        let outputs = self
            .raw
            .outputs
            .iter()
            .map(|g| g.iter().map(|&w| remap[w as usize]).collect())
            .collect();
        let raw = RawNetlist {
            input_names: self.raw.input_names.clone(),
            constants: self.raw.constants.clone(),
            nodes,
            outputs,
            meta: self.raw.meta.clone(),
        };
        (Netlist { raw }, removed)
    }

    /// One assignment per node, e.g. `w2 = XOR(w0, w1)`. Constant wires
    /// appear as `w5 = 0`.
    pub fn to_logic_text(&self) -> String {
        let mut out = String::new();
        let base = self.input_count();
        for (k, &c) in self.raw.constants.iter().enumerate() {
            let _ = writeln!(out, "w{} = {}", base + k, c as u8);
        }
        let first = self.first_node_wire();
        for (k, node) in self.raw.nodes.iter().enumerate() {
            let _ = write!(out, "w{} = ", first + k);
            match classify_gate(&node.table) {
                Ok(id) => out.push_str(id.entry().name),
                Err(_) => {
                    let digits = (node.table.len() / 4).max(1);
                    let _ = write!(out, "LUT_0x{:0digits$x}", node.table.bits());
                }
            }
            out.push('(');
            for (j, i) in node.inputs.iter().enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "w{i}");
            }
            out.push_str(")\n");
        }
        out
    }
}

/// A machine word holding one bit per example.
pub trait Word:
    Copy + PartialEq + BitAnd<Output = Self> + BitOr<Output = Self> + BitXor<Output = Self> + Not<Output = Self>
{
    const BITS: usize;
    const ZERO: Self;
    const ONES: Self;
    fn bit(self, lane: usize) -> bool;
    fn set_bit(&mut self, lane: usize);
}

macro_rules! impl_word {
    ($($t:ty),*) => {$(
        impl Word for $t {
            const BITS: usize = <$t>::BITS as usize;
            const ZERO: Self = 0;
            const ONES: Self = <$t>::MAX;
            #[inline]
            fn bit(self, lane: usize) -> bool {
                (self >> lane) & 1 == 1
            }
            #[inline]
            fn set_bit(&mut self, lane: usize) {
                *self |= 1 << lane;
            }
        }
    )*};
}

impl_word!(u8, u16, u32, u64, u128);

/// Sum of minterms of `table` over word inputs. Tables with more ones than
/// zeros are evaluated as the complement of their zero minterms.
fn eval_table<W: Word>(table: TruthTable, args: &[W]) -> W {
    let n = args.len();
    let ones = table.bits().count_ones() as usize;
    let invert = ones * 2 > table.len();
    let mut acc = W::ZERO;
    for corner in 0..table.len() {
        if table.get(corner) == invert {
            continue;
        }
        let mut term = W::ONES;
        for (j, &a) in args.iter().enumerate() {
            let bit = (corner >> (n - 1 - j)) & 1 == 1;
            term = term & if bit { a } else { !a };
        }
        acc = acc | term;
    }
    if invert {
        !acc
    } else {
        acc
    }
}

/// Packs Boolean examples (`examples[e][i]` ∈ {0, 1}) into word streams, one
/// per input wire.
pub fn pack_examples<W: Word>(examples: &[&[u8]], inputs: usize) -> Vec<Vec<W>> {
    let blocks = examples.len().div_ceil(W::BITS);
    let mut out = vec![vec![W::ZERO; blocks]; inputs];
    for (e, x) in examples.iter().enumerate() {
        for (i, &v) in x.iter().enumerate().take(inputs) {
            if v != 0 {
                out[i][e / W::BITS].set_bit(e % W::BITS);
            }
        }
    }
    out
}

/// Hardens every node of `network` and unrolls it into a flat netlist.
/// Conv trees are instantiated once per spatial position with shared
/// tables; pooling becomes 4-input OR nodes.
pub fn harden(network: &Network) -> Netlist {
    let hard = network.harden();
    let n_in = network.input_dim();
    let has_conv = network.layers().iter().any(|l| matches!(l, Layer::Conv(_)));
    let constants = if has_conv { vec![false] } else { Vec::new() };
    let zero_wire = n_in as u32;
    let first = (n_in + constants.len()) as u32;
    let mut nodes: Vec<NetNode> = Vec::new();
    let push = |nodes: &mut Vec<NetNode>, table: TruthTable, inputs: Vec<u32>, origin: Option<NodeOrigin>| {
        nodes.push(NetNode { table, inputs, origin });
        first + nodes.len() as u32 - 1
    };
    let mut cur: Vec<u32> = (0..n_in as u32).collect();
    for (li, layer) in network.layers().iter().enumerate() {
        let tables = hard.layer_tables(li);
        match layer {
            Layer::Dense(d) => {
                cur = (0..d.node_count())
                    .map(|j| {
                        let inputs = d.node_inputs(j).iter().map(|&i| cur[i as usize]).collect();
                        let origin = NodeOrigin {
                            layer: li as u32,
                            node: j as u32,
                        };
                        push(&mut nodes, tables[j], inputs, Some(origin))
                    })
                    .collect();
            }
            Layer::Conv(c) => {
                let s = c.in_shape();
                let (h, w) = (s.height, s.width);
                let per_tree = c.nodes_per_tree();
                let mut pre = vec![0u32; c.out_channels() * h * w];
                let mut tree = vec![0u32; per_tree];
                for o in 0..c.out_channels() {
                    for r in 0..h {
                        for col in 0..w {
                            for i in 0..per_tree {
                                let inputs = c
                                    .node_sources(i)
                                    .iter()
                                    .map(|src| match *src {
                                        TreeInput::Leaf(l) => c
                                            .leaf_index(c.leaf(o, l), r, col)
                                            .map_or(zero_wire, |ix| cur[ix]),
                                        TreeInput::Node(k) => tree[k],
                                        TreeInput::Center => cur[c.center_index(o, r, col)],
                                    })
                                    .collect::<Vec<u32>>();
                                let bank_node = o * per_tree + i;
                                let origin = NodeOrigin {
                                    layer: li as u32,
                                    node: bank_node as u32,
                                };
                                tree[i] = push(&mut nodes, tables[bank_node], inputs, Some(origin));
                            }
                            pre[(o * h + r) * w + col] = tree[per_tree - 1];
                        }
                    }
                }
                let (oh, ow) = (h / 2, w / 2);
                let or4 = TruthTable::from_bits(4, OR4_BITS).expect("valid arity");
                cur = Vec::with_capacity(c.out_channels() * oh * ow);
                for o in 0..c.out_channels() {
                    for pr in 0..oh {
                        for pc in 0..ow {
                            let at = |dr: usize, dc: usize| pre[(o * h + 2 * pr + dr) * w + 2 * pc + dc];
                            let inputs = vec![at(0, 0), at(0, 1), at(1, 0), at(1, 1)];
                            cur.push(push(&mut nodes, or4, inputs, None));
                        }
                    }
                }
            }
            Layer::Flatten => {}
        }
    }
    let classes = network.classes();
    let size = cur.len() / classes;
    let outputs = cur.chunks(size).map(<[u32]>::to_vec).collect();
    let input_names = (0..n_in).map(|i| format!("x{i}")).collect();
    Netlist::new(
        input_names,
        constants,
        nodes,
        outputs,
        NetlistMeta {
            architecture_hash: network.wiring_fingerprint(),
            class_count: classes,
        },
    )
    .expect("unrolled network is topologically valid")
}

/// Gate statistics of a netlist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitStats {
    /// Catalog histogram of the 2-input nodes.
    pub gate_counts: [u64; 16],
    /// Nodes of other arities, including pooling.
    pub other_nodes: u64,
    pub total_nodes: u64,
    /// `(ID_A + ID_B) / 2-input nodes`, zero without 2-input nodes.
    pub identity_fraction: f64,
    /// Longest input-to-output path, counted in nodes.
    pub depth: usize,
}

pub fn circuit_stats(netlist: &Netlist) -> CircuitStats {
    let mut gate_counts = [0u64; 16];
    let mut other_nodes = 0;
    for node in netlist.nodes() {
        match classify_gate(&node.table) {
            Ok(id) => gate_counts[id.index()] += 1,
            Err(_) => other_nodes += 1,
        }
    }
    let two_input: u64 = gate_counts.iter().sum();
    let identity = gate_counts[GateId::ID_A.index()] + gate_counts[GateId::ID_B.index()];
    let first = netlist.first_node_wire();
    let mut depth = vec![0usize; netlist.wire_count()];
    for (k, node) in netlist.nodes().iter().enumerate() {
        depth[first + k] = 1 + node.inputs.iter().map(|&i| depth[i as usize]).max().unwrap_or(0);
    }
    let max_depth = netlist.outputs().iter().flatten().map(|&w| depth[w as usize]).max().unwrap_or(0);
    CircuitStats {
        gate_counts,
        other_nodes,
        total_nodes: netlist.nodes().len() as u64,
        identity_fraction: if two_input == 0 {
            0.0
        } else {
            identity as f64 / two_input as f64
        },
        depth: max_depth,
    }
}

/// Per-class counts for Boolean examples, packed 64 per word.
pub fn netlist_eval(netlist: &Netlist, examples: &[&[u8]]) -> Result<Vec<Vec<u32>>> {
    if let Some(bad) = examples.iter().find(|x| x.len() != netlist.input_count()) {
        return Err(Error::Dimension {
            expected: netlist.input_count(),
            actual: bad.len(),
        });
    }
    let packed = pack_examples::<u64>(examples, netlist.input_count());
    netlist.class_counts(&packed, examples.len())
}

impl NetlistMeta {
    pub fn default_with_classes(class_count: usize) -> Self {
        Self {
            architecture_hash: String::new(),
            class_count,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{InitScheme, LogicDenseLayer, NodeBank, NodeKind, Shape, Wiring};
    use crate::layers::GroupSumLayer;
    use crate::rng::stream;

    fn xor_netlist() -> Netlist {
        Netlist::new(
            vec!["a".into(), "b".into()],
            vec![],
            vec![NetNode {
                table: GateId::XOR.table(),
                inputs: vec![0, 1],
                origin: None,
            }],
            vec![vec![2]],
            NetlistMeta {
                architecture_hash: String::new(),
                class_count: 1,
            },
        )
        .unwrap()
    }

    #[test]
    fn xor_text_and_words() {
        let n = xor_netlist();
        assert_eq!(n.to_logic_text(), "w2 = XOR(w0, w1)\n");
        let w = n.eval_words::<u8>(&[0b1100, 0b1010]).unwrap();
        assert_eq!(w[2], 0b0110);
    }

    #[test]
    fn three_input_hex() {
        let parity3 = TruthTable::from_fn(3, |c| c.count_ones() % 2 == 1).unwrap();
        let n = Netlist::new(
            (0..3).map(|i| format!("x{i}")).collect(),
            vec![],
            vec![NetNode {
                table: parity3,
                inputs: vec![0, 1, 2],
                origin: None,
            }],
            vec![vec![3]],
            NetlistMeta {
                architecture_hash: String::new(),
                class_count: 1,
            },
        )
        .unwrap();
        assert_eq!(n.to_logic_text(), "w3 = LUT_0x96(w0, w1, w2)\n");
    }

    #[test]
    fn rejects_forward_reference() {
        let err = Netlist::new(
            vec!["a".into()],
            vec![],
            vec![NetNode {
                table: GateId::AND.table(),
                inputs: vec![0, 1],
                origin: None,
            }],
            vec![vec![1]],
            NetlistMeta {
                architecture_hash: String::new(),
                class_count: 1,
            },
        );
        assert!(matches!(err, Err(Error::Netlist(_))));
    }

    #[test]
    fn minterm_eval_matches_table() {
        for bits in 0..256u64 {
            let t = TruthTable::from_bits(3, bits).unwrap();
            // lanes enumerate all 8 corners
            let args = [0b1111_0000u8, 0b1100_1100, 0b1010_1010];
            let out = eval_table(t, &args);
            for lane in 0..8 {
                let corner = ((lane >> 2) & 1) << 2 | ((lane >> 1) & 1) << 1 | (lane & 1);
                assert_eq!(out.bit(lane), t.get(corner), "table {bits:#x} lane {lane}");
            }
        }
    }

    #[test]
    fn tree_depth() {
        let mut nodes = Vec::new();
        for k in 0..4u32 {
            nodes.push(NetNode {
                table: GateId::XOR.table(),
                inputs: vec![2 * k, 2 * k + 1],
                origin: None,
            });
        }
        nodes.push(NetNode { table: GateId::AND.table(), inputs: vec![8, 9], origin: None });
        nodes.push(NetNode { table: GateId::AND.table(), inputs: vec![10, 11], origin: None });
        nodes.push(NetNode { table: GateId::OR.table(), inputs: vec![12, 13], origin: None });
        let n = Netlist::new(
            (0..8).map(|i| format!("x{i}")).collect(),
            vec![],
            nodes,
            vec![vec![14]],
            NetlistMeta::default_with_classes(1),
        )
        .unwrap();
        let s = circuit_stats(&n);
        assert_eq!(s.depth, 3);
        assert_eq!(s.total_nodes, 7);
        assert_eq!(s.gate_counts.iter().sum::<u64>() + s.other_nodes, s.total_nodes);
    }

    #[test]
    fn residual_dense_hardens_to_identity_and_folds_away() {
        let mut bank = NodeBank::new(NodeKind::Warp, 2, 8).unwrap();
        bank.init(InitScheme::residual(1.0, 0.0), &mut stream(1, 1)).unwrap();
        let layer = LogicDenseLayer::new(8, 8, 2, NodeKind::Warp, &Wiring::Random, &mut stream(1, 0)).unwrap();
        let rows = (0..8).map(|j| layer.node_inputs(j).to_vec()).collect();
        let layer = LogicDenseLayer::from_parts(8, bank, rows).unwrap();
        let net = Network::from_layers(
            Shape::flat(8),
            vec![Layer::Dense(layer)],
            GroupSumLayer::new(2, 1.0).unwrap(),
        )
        .unwrap();
        let nl = harden(&net);
        assert!(nl.nodes().iter().all(|n| n.table == GateId::ID_A.table()));
        let stats = circuit_stats(&nl);
        assert_eq!(stats.identity_fraction, 1.0);
        assert_eq!(stats.gate_counts, net.gate_histogram());
        let (folded, removed) = nl.fold_identities();
        assert_eq!(removed, 8);
        assert!(folded.nodes().is_empty());
        assert_eq!(harden(&net), nl);
        let xs: Vec<Vec<u8>> = (0..256u32).map(|v| (0..8).map(|i| ((v >> i) & 1) as u8).collect()).collect();
        let refs: Vec<&[u8]> = xs.iter().map(Vec::as_slice).collect();
        let a = netlist_eval(&nl, &refs).unwrap();
        let b = netlist_eval(&folded, &refs).unwrap();
        assert_eq!(a, b);
        let hard = net.harden();
        for (x, c) in xs.iter().zip(&a) {
            assert_eq!(&net.discrete_counts(&hard, x), c);
        }
    }
}
