use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NodeBank, NodeKind, Shape};
use crate::boolean::TruthTable;
use crate::relax::{RelaxMode, RelaxParams};
use crate::{Error, Result};

const MAX_DEPTH: usize = 6;
const MAX_TREE: usize = 1 << MAX_DEPTH;

/// A tree leaf: one input channel at an offset inside the 3×3 receptive field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leaf {
    pub channel: u32,
    pub dr: i8,
    pub dc: i8,
}

/// Where a tree node reads each of its two inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Leaf(usize),
    Node(usize),
    Center,
}

/// Residual convolutional logic block.
///
/// Every output channel owns a complete binary tree of `2^depth - 1` 2-input
/// nodes over leaves in a 3×3 window (zero padding), shared across spatial
/// positions. A learnable merge node combines the tree output with the
/// centre pixel of input channel `o mod in_channels`. Each 2×2 window is then
/// reduced by max (logical OR once hardened), halving both spatial dims.
///
/// Node `i` of channel `o` is bank node `o · 2^depth + i`: bottom level first,
/// root at `2^depth - 2`, merge node last.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualLogicBlock {
    in_shape: Shape,
    out_channels: usize,
    depth: usize,
    bank: NodeBank,
    leaves: Vec<Leaf>,
    sources: Vec<[Source; 2]>,
}

fn tree_sources(depth: usize) -> Vec<[Source; 2]> {
    let mut sources = Vec::with_capacity(1 << depth);
    let mut prev: Vec<Source> = (0..1 << depth).map(Source::Leaf).collect();
    while prev.len() > 1 {
        let next = prev
            .chunks(2)
            .map(|pair| {
                sources.push([pair[0], pair[1]]);
                Source::Node(sources.len() - 1)
            })
            .collect();
        prev = next;
    }
    sources.push([prev[0], Source::Center]);
    sources
}

impl ResidualLogicBlock {
    pub fn new<R: Rng + ?Sized>(
        in_shape: Shape,
        out_channels: usize,
        depth: usize,
        kind: NodeKind,
        rng: &mut R,
    ) -> Result<Self> {
        Self::check_shape(in_shape, depth)?;
        let per_tree = 1 << depth;
        let window = in_shape.channels * 9;
        let mut leaves = Vec::with_capacity(out_channels * per_tree);
        for _ in 0..out_channels * per_tree / 2 {
            for i in index::sample(rng, window, 2) {
                leaves.push(Leaf {
                    channel: (i / 9) as u32,
                    dr: (i % 9 / 3) as i8 - 1,
                    dc: (i % 3) as i8 - 1,
                });
            }
        }
        let bank = NodeBank::new(kind, 2, out_channels * per_tree)?;
        Self::from_parts(in_shape, out_channels, depth, bank, leaves)
    }

    pub fn from_parts(
        in_shape: Shape,
        out_channels: usize,
        depth: usize,
        bank: NodeBank,
        leaves: Vec<Leaf>,
    ) -> Result<Self> {
        Self::check_shape(in_shape, depth)?;
        let per_tree = 1 << depth;
        if bank.arity() != 2 || bank.node_count() != out_channels * per_tree {
            return Err(Error::Length {
                expected: out_channels * per_tree,
                actual: bank.node_count(),
            });
        }
        if leaves.len() != out_channels * per_tree {
            return Err(Error::Length {
                expected: out_channels * per_tree,
                actual: leaves.len(),
            });
        }
        for l in &leaves {
            if l.channel as usize >= in_shape.channels || l.dr.abs() > 1 || l.dc.abs() > 1 {
                return Err(Error::Config(alloc::format!("leaf {l:?} outside the receptive field")));
            }
        }
        Ok(Self {
            in_shape,
            out_channels,
            depth,
            bank,
            leaves,
            sources: tree_sources(depth),
        })
    }

    fn check_shape(in_shape: Shape, depth: usize) -> Result<()> {
        if !(1..=MAX_DEPTH).contains(&depth) {
            return Err(Error::Config(alloc::format!("tree depth must be in 1..=6, got {depth}")));
        }
        if in_shape.height < 2 || in_shape.width < 2 || !in_shape.height.is_multiple_of(2) || !in_shape.width.is_multiple_of(2) {
            return Err(Error::Config(alloc::format!(
                "convolution needs even spatial dims, got {}x{}",
                in_shape.height,
                in_shape.width
            )));
        }
        Ok(())
    }

    pub fn in_shape(&self) -> Shape {
        self.in_shape
    }

    pub fn out_shape(&self) -> Shape {
        Shape::image(self.out_channels, self.in_shape.height / 2, self.in_shape.width / 2)
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Nodes per output channel: the tree plus the merge node.
    pub fn nodes_per_tree(&self) -> usize {
        1 << self.depth
    }

    pub fn bank(&self) -> &NodeBank {
        &self.bank
    }

    pub fn bank_mut(&mut self) -> &mut NodeBank {
        &mut self.bank
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    pub fn leaf(&self, channel: usize, i: usize) -> Leaf {
        self.leaves[channel * self.nodes_per_tree() + i]
    }

    /// Channel feeding the residual path of output channel `o`.
    pub fn residual_channel(&self, o: usize) -> usize {
        o % self.in_shape.channels
    }

    /// Flat input index read by `leaf` at `(r, c)`, or `None` in the padding.
    #[inline]
    pub fn leaf_index(&self, leaf: Leaf, r: usize, c: usize) -> Option<usize> {
        let rr = r as isize + leaf.dr as isize;
        let cc = c as isize + leaf.dc as isize;
        let (h, w) = (self.in_shape.height as isize, self.in_shape.width as isize);
        if rr < 0 || cc < 0 || rr >= h || cc >= w {
            return None;
        }
        Some((leaf.channel as usize * h as usize + rr as usize) * w as usize + cc as usize)
    }

    #[inline]
    pub fn center_index(&self, o: usize, r: usize, c: usize) -> usize {
        (self.residual_channel(o) * self.in_shape.height + r) * self.in_shape.width + c
    }

    /// Wiring of node `i` in channel `o`'s tree as seen from outside:
    /// `(leaf or node or centre, ...)`. Used when unrolling into a netlist.
    pub(crate) fn node_sources(&self, i: usize) -> [TreeInput; 2] {
        self.sources[i].map(|s| match s {
            Source::Leaf(l) => TreeInput::Leaf(l),
            Source::Node(n) => TreeInput::Node(n),
            Source::Center => TreeInput::Center,
        })
    }

    /// Evaluates channel `o`'s tree at one position. `node` maps
    /// `(tree node, inputs)` to an output; inputs are recorded per node.
    #[inline]
    fn run_tree<T: Copy + Default>(
        &self,
        o: usize,
        r: usize,
        c: usize,
        x: &[T],
        inputs: &mut [[T; 2]],
        mut node: impl FnMut(usize, [T; 2]) -> T,
    ) -> T {
        let per_tree = self.nodes_per_tree();
        let mut level = [T::default(); MAX_TREE];
        for (i, v) in level[..per_tree].iter_mut().enumerate() {
            if let Some(ix) = self.leaf_index(self.leaf(o, i), r, c) {
                *v = x[ix];
            }
        }
        let mut width = per_tree;
        let mut idx = 0;
        while width > 1 {
            for i in 0..width / 2 {
                let inp = [level[2 * i], level[2 * i + 1]];
                inputs[idx] = inp;
                level[i] = node(idx, inp);
                idx += 1;
            }
            width /= 2;
        }
        let inp = [level[0], x[self.center_index(o, r, c)]];
        inputs[idx] = inp;
        node(idx, inp)
    }

    /// Relaxed forward of one example. `pre_pool` receives `[O × H × W]`
    /// merge outputs; `noise` receives `[O × H × W × nodes_per_tree]` draws
    /// when the mode samples noise, and may be empty otherwise.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn forward_example<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        mode: RelaxMode,
        relax: &RelaxParams,
        rng: &mut R,
        out: &mut [f64],
        pre_pool: &mut [f64],
        noise: &mut [f64],
    ) {
        let (h, w) = (self.in_shape.height, self.in_shape.width);
        let per_tree = self.nodes_per_tree();
        let record = !noise.is_empty();
        let mut inputs = [[0.0; 2]; MAX_TREE];
        for o in 0..self.out_channels {
            for r in 0..h {
                for c in 0..w {
                    let pos = (o * h + r) * w + c;
                    let base = pos * per_tree;
                    pre_pool[pos] = self.run_tree(o, r, c, x, &mut inputs, |i, inp| {
                        let f = self.bank.forward(o * per_tree + i, &inp, mode, relax, rng);
                        if record {
                            noise[base + i] = f.noise;
                        }
                        f.value
                    });
                }
            }
        }
        pool_max(pre_pool, self.out_channels, h, w, out);
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn backward_example(
        &self,
        x: &[f64],
        pre_pool: &[f64],
        noise: &[f64],
        upstream: &[f64],
        mode: RelaxMode,
        relax: &RelaxParams,
        grad_params: &mut [f64],
        grad_x: &mut [f64],
    ) {
        let (h, w) = (self.in_shape.height, self.in_shape.width);
        let (oh, ow) = (h / 2, w / 2);
        let per_tree = self.nodes_per_tree();
        let mut inputs = [[0.0; 2]; MAX_TREE];
        let mut gout = [0.0; MAX_TREE];
        for o in 0..self.out_channels {
            for pr in 0..oh {
                for pc in 0..ow {
                    let up = upstream[(o * oh + pr) * ow + pc];
                    if up.abs() < crate::relax::SLOPE_FLOOR {
                        continue;
                    }
                    let (r, c) = argmax_window(pre_pool, o, h, w, pr, pc);
                    let base = ((o * h + r) * w + c) * per_tree;
                    let nz = |i: usize| noise.get(base + i).copied().unwrap_or(0.0);
                    self.run_tree(o, r, c, x, &mut inputs, |i, inp| {
                        self.bank
                            .forward_with_noise(o * per_tree + i, &inp, mode, relax, nz(i))
                            .value
                    });
                    gout[..per_tree].fill(0.0);
                    gout[per_tree - 1] = up;
                    for i in (0..per_tree).rev() {
                        if gout[i] == 0.0 {
                            continue;
                        }
                        let mut gx = [0.0; 2];
                        self.bank.backward(
                            o * per_tree + i,
                            &inputs[i],
                            gout[i],
                            mode,
                            relax,
                            nz(i),
                            grad_params,
                            &mut gx,
                        );
                        for (src, g) in self.sources[i].iter().zip(gx) {
                            match *src {
                                Source::Node(n) => gout[n] += g,
                                Source::Leaf(l) => {
                                    if let Some(ix) = self.leaf_index(self.leaf(o, l), r, c) {
                                        grad_x[ix] += g;
                                    }
                                }
                                Source::Center => grad_x[self.center_index(o, r, c)] += g,
                            }
                        }
                    }
                }
            }
        }
    }

    /// Boolean forward with hardened `tables` (one per bank node).
    pub(crate) fn discrete_example(&self, tables: &[TruthTable], x: &[u8], out: &mut [u8]) {
        let (h, w) = (self.in_shape.height, self.in_shape.width);
        let per_tree = self.nodes_per_tree();
        let mut inputs = [[0u8; 2]; MAX_TREE];
        let mut pre = vec![0u8; self.out_channels * h * w];
        for o in 0..self.out_channels {
            for r in 0..h {
                for c in 0..w {
                    pre[(o * h + r) * w + c] = self.run_tree(o, r, c, x, &mut inputs, |i, inp| {
                        tables[o * per_tree + i].get(((inp[0] << 1) | inp[1]) as usize) as u8
                    });
                }
            }
        }
        let (oh, ow) = (h / 2, w / 2);
        for o in 0..self.out_channels {
            for pr in 0..oh {
                for pc in 0..ow {
                    let at = |dr: usize, dc: usize| pre[(o * h + 2 * pr + dr) * w + 2 * pc + dc];
                    out[(o * oh + pr) * ow + pc] = at(0, 0) | at(0, 1) | at(1, 0) | at(1, 1);
                }
            }
        }
    }
}

/// Input of a tree node, for netlist unrolling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TreeInput {
    Leaf(usize),
    Node(usize),
    Center,
}

/// First position holding the maximum of a 2×2 window.
#[inline]
fn argmax_window(pre: &[f64], o: usize, h: usize, w: usize, pr: usize, pc: usize) -> (usize, usize) {
    let mut best = (2 * pr, 2 * pc);
    let mut best_v = pre[(o * h + best.0) * w + best.1];
    for (dr, dc) in [(0, 1), (1, 0), (1, 1)] {
        let (r, c) = (2 * pr + dr, 2 * pc + dc);
        let v = pre[(o * h + r) * w + c];
        if v > best_v {
            best = (r, c);
            best_v = v;
        }
    }
    best
}

fn pool_max(pre: &[f64], channels: usize, h: usize, w: usize, out: &mut [f64]) {
    let (oh, ow) = (h / 2, w / 2);
    for o in 0..channels {
        for pr in 0..oh {
            for pc in 0..ow {
                let (r, c) = argmax_window(pre, o, h, w, pr, pc);
                out[(o * oh + pr) * ow + pc] = pre[(o * h + r) * w + c];
            }
        }
    }
}

/// Relaxed forward of a row-major batch `[B × C × H × W]`.
pub fn conv_forward<R: Rng + ?Sized>(
    block: &ResidualLogicBlock,
    batch: &[f64],
    mode: RelaxMode,
    params: &RelaxParams,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let in_dim = block.in_shape.dim();
    if !batch.len().is_multiple_of(in_dim) {
        return Err(Error::Dimension {
            expected: in_dim,
            actual: batch.len() % in_dim,
        });
    }
    let out_dim = block.out_shape().dim();
    let rows = batch.len() / in_dim;
    let mut out = vec![0.0; rows * out_dim];
    let mut pre = vec![0.0; block.out_channels * block.in_shape.height * block.in_shape.width];
    for (x, o) in batch.chunks(in_dim).zip(out.chunks_mut(out_dim)) {
        block.forward_example(x, mode, params, rng, o, &mut pre, &mut []);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolean::GateId;
    use crate::rng::stream;
    use rand::Rng;

    fn set_gate(bank: &mut NodeBank, node: usize, gate: GateId) {
        bank.params_mut()[node * 4..node * 4 + 4].copy_from_slice(gate.entry().coeffs().values());
    }

    /// Depth-1 block: a single tree node on two leaves plus the merge node.
    fn identity_block(shape: Shape) -> ResidualLogicBlock {
        let mut bank = NodeBank::new(NodeKind::Warp, 2, shape.channels * 2).unwrap();
        let mut leaves = Vec::new();
        for o in 0..shape.channels {
            set_gate(&mut bank, 2 * o, GateId::ID_A);
            set_gate(&mut bank, 2 * o + 1, GateId::ID_A);
            leaves.push(Leaf { channel: o as u32, dr: 0, dc: 0 });
            leaves.push(Leaf { channel: o as u32, dr: 1, dc: 1 });
        }
        ResidualLogicBlock::from_parts(shape, shape.channels, 1, bank, leaves).unwrap()
    }

    fn max_pool_oracle(x: &[f64], shape: Shape) -> Vec<f64> {
        let (h, w) = (shape.height, shape.width);
        let mut out = Vec::new();
        for ch in 0..shape.channels {
            for pr in 0..h / 2 {
                for pc in 0..w / 2 {
                    let mut m = f64::NEG_INFINITY;
                    for r in 2 * pr..2 * pr + 2 {
                        for c in 2 * pc..2 * pc + 2 {
                            m = m.max(x[(ch * h + r) * w + c]);
                        }
                    }
                    out.push(m);
                }
            }
        }
        out
    }

    #[test]
    fn identity_tree_is_max_pool() {
        let shape = Shape::image(2, 6, 4);
        let block = identity_block(shape);
        let mut rng = stream(3, 0);
        let x: Vec<f64> = (0..2 * shape.dim()).map(|_| rng.random::<bool>() as u8 as f64).collect();
        let out = conv_forward(&block, &x, RelaxMode::StraightThrough, &RelaxParams::default(), &mut rng).unwrap();
        let mut want = max_pool_oracle(&x[..shape.dim()], shape);
        want.extend(max_pool_oracle(&x[shape.dim()..], shape));
        assert_eq!(out, want);

        let tables = block.bank().harden_all();
        let bits: Vec<u8> = x[..shape.dim()].iter().map(|&v| v as u8).collect();
        let mut hard = vec![0u8; block.out_shape().dim()];
        block.discrete_example(&tables, &bits, &mut hard);
        let want: Vec<u8> = max_pool_oracle(&x[..shape.dim()], shape).iter().map(|&v| v as u8).collect();
        assert_eq!(hard, want);
    }

    #[test]
    fn constant_trees() {
        let shape = Shape::image(1, 4, 4);
        let mut block = ResidualLogicBlock::new(shape, 3, 2, NodeKind::Warp, &mut stream(1, 0)).unwrap();
        for n in 0..block.bank().node_count() {
            set_gate(block.bank_mut(), n, GateId::CONST0);
        }
        let x = vec![1.0; shape.dim()];
        let tau = 2.0;
        let out = conv_forward(&block, &x, RelaxMode::Deterministic, &RelaxParams::with_tau(tau), &mut stream(0, 0)).unwrap();
        let want = crate::math::sigmoid(-1.0 / tau);
        assert!(out.iter().all(|&v| (v - want).abs() < 1e-15));
        let mut hard = vec![1u8; block.out_shape().dim()];
        block.discrete_example(&block.bank().harden_all(), &vec![1u8; shape.dim()], &mut hard);
        assert!(hard.iter().all(|&v| v == 0));
    }

    #[test]
    fn padding_reads_zero() {
        let shape = Shape::image(1, 2, 2);
        let mut bank = NodeBank::new(NodeKind::Warp, 2, 2).unwrap();
        // tree node ID_A on a leaf above the image, merge ID_A
        set_gate(&mut bank, 0, GateId::ID_A);
        set_gate(&mut bank, 1, GateId::ID_A);
        let leaves = vec![Leaf { channel: 0, dr: -1, dc: 0 }, Leaf { channel: 0, dr: 0, dc: 0 }];
        let block = ResidualLogicBlock::from_parts(shape, 1, 1, bank, leaves).unwrap();
        assert_eq!(block.leaf_index(block.leaf(0, 0), 0, 1), None);
        let mut hard = vec![1u8; 1];
        block.discrete_example(&block.bank().harden_all(), &[1, 1, 1, 1], &mut hard);
        // rows 0 read padding; row 1 reads row 0 which is 1
        assert_eq!(hard, [1]);
        let mut pre = vec![0u8; 4];
        let mut inputs = [[0u8; 2]; MAX_TREE];
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            pre[r * 2 + c] = block.run_tree(0, r, c, &[1u8, 1, 1, 1][..], &mut inputs, |_, inp| inp[0]);
        }
        assert_eq!(pre, [0, 0, 1, 1]);
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut rng = stream(0, 0);
        assert!(ResidualLogicBlock::new(Shape::image(1, 3, 4), 2, 2, NodeKind::Warp, &mut rng).is_err());
        assert!(ResidualLogicBlock::new(Shape::image(1, 4, 4), 2, 0, NodeKind::Warp, &mut rng).is_err());
        assert!(ResidualLogicBlock::new(Shape::flat(16), 2, 2, NodeKind::Warp, &mut rng).is_err());
    }

    #[test]
    fn tree_layout() {
        let s = tree_sources(3);
        assert_eq!(s.len(), 8);
        assert_eq!(s[0], [Source::Leaf(0), Source::Leaf(1)]);
        assert_eq!(s[4], [Source::Node(0), Source::Node(1)]);
        assert_eq!(s[6], [Source::Node(4), Source::Node(5)]);
        assert_eq!(s[7], [Source::Node(6), Source::Center]);
    }
}
