use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use super::{NodeBank, NodeKind, Wiring};
use crate::boolean::TruthTable;
use crate::relax::{RelaxMode, RelaxParams};
use crate::{Error, Result};

/// A bank of LUT nodes, each wired to `arity` fixed inputs of the previous
/// layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicDenseLayer {
    in_dim: usize,
    bank: NodeBank,
    /// Row-major `[node_count × arity]`.
    connections: Vec<u32>,
}

/// Draws `arity` distinct inputs per node, uniformly from `0..in_dim`.
pub fn make_connections<R: Rng + ?Sized>(
    in_dim: usize,
    node_count: usize,
    arity: usize,
    rng: &mut R,
) -> Result<Vec<Vec<u32>>> {
    if in_dim < arity {
        return Err(Error::Wiring { in_dim, arity });
    }
    Ok((0..node_count)
        .map(|_| index::sample(rng, in_dim, arity).into_iter().map(|i| i as u32).collect())
        .collect())
}

fn aligned_connections<R: Rng + ?Sized>(
    in_dim: usize,
    node_count: usize,
    arity: usize,
    rng: &mut R,
) -> Result<Vec<Vec<u32>>> {
    if in_dim < arity {
        return Err(Error::Wiring { in_dim, arity });
    }
    Ok((0..node_count)
        .map(|j| {
            let first = j % in_dim;
            let mut row = vec![first as u32];
            row.extend(
                index::sample(rng, in_dim - 1, arity - 1)
                    .into_iter()
                    .map(|i| if i >= first { i + 1 } else { i } as u32),
            );
            row
        })
        .collect())
}

impl LogicDenseLayer {
    pub fn new<R: Rng + ?Sized>(
        in_dim: usize,
        node_count: usize,
        arity: usize,
        kind: NodeKind,
        wiring: &Wiring,
        rng: &mut R,
    ) -> Result<Self> {
        let bank = NodeBank::new(kind, arity, node_count)?;
        let rows = match wiring {
            Wiring::Random => make_connections(in_dim, node_count, arity, rng)?,
            Wiring::Aligned => aligned_connections(in_dim, node_count, arity, rng)?,
            Wiring::Explicit(rows) => rows.clone(),
        };
        Self::from_parts(in_dim, bank, rows)
    }

    /// Builds a layer from explicit connection rows, validating them.
    pub fn from_parts(in_dim: usize, bank: NodeBank, rows: Vec<Vec<u32>>) -> Result<Self> {
        let arity = bank.arity();
        if rows.len() != bank.node_count() {
            return Err(Error::Length {
                expected: bank.node_count(),
                actual: rows.len(),
            });
        }
        let mut connections = Vec::with_capacity(rows.len() * arity);
        for row in &rows {
            if row.len() != arity {
                return Err(Error::Length {
                    expected: arity,
                    actual: row.len(),
                });
            }
            for (i, &a) in row.iter().enumerate() {
                if a as usize >= in_dim {
                    return Err(Error::Dimension {
                        expected: in_dim,
                        actual: a as usize,
                    });
                }
                if row[..i].contains(&a) {
                    return Err(Error::Config(alloc::format!("node wired twice to input {a}")));
                }
            }
            connections.extend_from_slice(row);
        }
        Ok(Self {
            in_dim,
            bank,
            connections,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn node_count(&self) -> usize {
        self.bank.node_count()
    }

    pub fn arity(&self) -> usize {
        self.bank.arity()
    }

    pub fn bank(&self) -> &NodeBank {
        &self.bank
    }

    pub fn bank_mut(&mut self) -> &mut NodeBank {
        &mut self.bank
    }

    #[inline]
    pub fn node_inputs(&self, node: usize) -> &[u32] {
        let n = self.arity();
        &self.connections[node * n..(node + 1) * n]
    }

    pub fn connections(&self) -> &[u32] {
        &self.connections
    }

    /// Relaxed forward of one example. `noise` receives one value per node
    /// when the mode samples noise and may be empty otherwise.
    pub(crate) fn forward_example<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        mode: RelaxMode,
        relax: &RelaxParams,
        rng: &mut R,
        out: &mut [f64],
        noise: &mut [f64],
    ) {
        let n = self.arity();
        let mut gathered = [0.0; crate::MAX_ARITY];
        for (j, o) in out.iter_mut().enumerate() {
            for (g, &i) in gathered.iter_mut().zip(self.node_inputs(j)) {
                *g = x[i as usize];
            }
            let f = self.bank.forward(j, &gathered[..n], mode, relax, rng);
            *o = f.value;
            if let Some(slot) = noise.get_mut(j) {
                *slot = f.noise;
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn backward_example(
        &self,
        x: &[f64],
        noise: &[f64],
        upstream: &[f64],
        mode: RelaxMode,
        relax: &RelaxParams,
        grad_params: &mut [f64],
        grad_x: &mut [f64],
    ) {
        let n = self.arity();
        let mut gathered = [0.0; crate::MAX_ARITY];
        let mut gx = [0.0; crate::MAX_ARITY];
        for (j, &up) in upstream.iter().enumerate() {
            if up.abs() < crate::relax::SLOPE_FLOOR {
                continue;
            }
            let inputs = self.node_inputs(j);
            for (g, &i) in gathered.iter_mut().zip(inputs) {
                *g = x[i as usize];
            }
            gx[..n].fill(0.0);
            let nz = noise.get(j).copied().unwrap_or(0.0);
            self.bank
                .backward(j, &gathered[..n], up, mode, relax, nz, grad_params, &mut gx[..n]);
            for (&i, g) in inputs.iter().zip(&gx[..n]) {
                grad_x[i as usize] += g;
            }
        }
    }

    /// Boolean forward with hardened `tables` (one per node).
    pub(crate) fn discrete_example(&self, tables: &[TruthTable], x: &[u8], out: &mut [u8]) {
        for (j, o) in out.iter_mut().enumerate() {
            let corner = self
                .node_inputs(j)
                .iter()
                .fold(0usize, |acc, &i| (acc << 1) | x[i as usize] as usize);
            *o = tables[j].get(corner) as u8;
        }
    }
}

/// Relaxed forward of a row-major batch `[B × in_dim]`.
pub fn dense_forward<R: Rng + ?Sized>(
    layer: &LogicDenseLayer,
    batch: &[f64],
    mode: RelaxMode,
    params: &RelaxParams,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !batch.len().is_multiple_of(layer.in_dim) {
        return Err(Error::Dimension {
            expected: layer.in_dim,
            actual: batch.len() % layer.in_dim,
        });
    }
    let rows = batch.len() / layer.in_dim;
    let mut out = vec![0.0; rows * layer.node_count()];
    for (x, o) in batch.chunks(layer.in_dim).zip(out.chunks_mut(layer.node_count())) {
        layer.forward_example(x, mode, params, rng, o, &mut []);
    }
    Ok(out)
}
