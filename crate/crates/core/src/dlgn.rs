//! Baseline node: a softmax mixture over all sixteen relaxed 2-input gates.
//!
//! Each gate is relaxed to the multilinear extension of its truth table, so
//! it is exact at the four Boolean corners.

use serde::{Deserialize, Serialize};

use crate::boolean::{GateId, TruthTable};
use crate::math::{argmax, softmax_into};
use crate::relax::{NodeForward, RelaxMode};
use crate::{Error, Result};

/// Parameters per baseline node.
pub const DLGN_PARAMS: usize = 16;

/// Weights of the corners 00, 01, 10, 11 at `(a, b)`.
#[inline]
fn corner_weights(a: f64, b: f64) -> [f64; 4] {
    [(1.0 - a) * (1.0 - b), (1.0 - a) * b, a * (1.0 - b), a * b]
}

fn table_value(tt: TruthTable, a: f64, b: f64) -> f64 {
    corner_weights(a, b)
        .iter()
        .enumerate()
        .filter(|&(k, _)| tt.get(k))
        .map(|(_, w)| w)
        .sum()
}

/// Multilinear relaxation of gate `gate_id` at `(a, b) ∈ [0, 1]²`.
pub fn relaxed_gate(gate_id: usize, a: f64, b: f64) -> Result<f64> {
    let gate = GateId::new(gate_id)?;
    Ok(table_value(gate.table(), a, b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlgnNodeParams {
    pub logits: [f64; DLGN_PARAMS],
}

impl DlgnNodeParams {
    pub fn from_slice(logits: &[f64]) -> Result<Self> {
        let logits = logits.try_into().map_err(|_| Error::Length {
            expected: DLGN_PARAMS,
            actual: logits.len(),
        })?;
        Ok(Self { logits })
    }
}

/// Mixture truth-table weights `w_k = Σ_g p_g · tt_g[k]`.
#[inline]
fn mixture_table(logits: &[f64], temperature: f64, probs: &mut [f64; DLGN_PARAMS]) -> [f64; 4] {
    softmax_into(logits, temperature, probs);
    let mut w = [0.0; 4];
    for (g, p) in probs.iter().enumerate() {
        let tt = GateId(g as u8).table();
        for (k, wk) in w.iter_mut().enumerate() {
            if tt.get(k) {
                *wk += p;
            }
        }
    }
    w
}

pub fn dlgn_node_forward(params: &DlgnNodeParams, a: f64, b: f64, temperature: f64) -> f64 {
    mixture_value(&params.logits, a, b, temperature)
}

#[inline]
pub(crate) fn mixture_value(logits: &[f64], a: f64, b: f64, temperature: f64) -> f64 {
    let (a, b) = (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
    let mut probs = [0.0; DLGN_PARAMS];
    let w = mixture_table(logits, temperature, &mut probs);
    let cw = corner_weights(a, b);
    w.iter().zip(cw).map(|(w, c)| w * c).sum()
}

/// Forward pass of one baseline node under `mode`.
///
/// The mixture is noise-free in every mode; straight-through thresholds it
/// at 0.5.
#[inline]
pub(crate) fn forward_slice(logits: &[f64], x: &[f64], mode: RelaxMode, temperature: f64) -> NodeForward {
    let soft = mixture_value(logits, x[0], x[1], temperature);
    let value = match mode {
        RelaxMode::StraightThrough => {
            if soft >= 0.5 {
                1.0
            } else {
                0.0
            }
        }
        _ => soft,
    };
    NodeForward {
        value,
        soft,
        noise: 0.0,
    }
}

/// Accumulates gradients of the soft mixture output.
#[inline]
pub(crate) fn backward_slice(
    logits: &[f64],
    x: &[f64],
    upstream: f64,
    temperature: f64,
    grad_logits: &mut [f64],
    grad_x: &mut [f64],
) {
    let (a, b) = (x[0].clamp(0.0, 1.0), x[1].clamp(0.0, 1.0));
    let mut probs = [0.0; DLGN_PARAMS];
    let w = mixture_table(logits, temperature, &mut probs);
    let cw = corner_weights(a, b);
    let out: f64 = w.iter().zip(cw).map(|(w, c)| w * c).sum();
    for (g, (gl, p)) in grad_logits.iter_mut().zip(probs.iter()).enumerate() {
        let v = table_value(GateId(g as u8).table(), a, b);
        *gl += upstream * p * (v - out) / temperature;
    }
    if (0.0..=1.0).contains(&x[0]) {
        grad_x[0] += upstream * ((w[2] - w[0]) * (1.0 - b) + (w[3] - w[1]) * b);
    }
    if (0.0..=1.0).contains(&x[1]) {
        grad_x[1] += upstream * ((w[1] - w[0]) * (1.0 - a) + (w[3] - w[2]) * a);
    }
}

/// Most probable gate; ties go to the lowest id.
pub fn dlgn_harden(params: &DlgnNodeParams) -> GateId {
    harden_slice(&params.logits)
}

pub(crate) fn harden_slice(logits: &[f64]) -> GateId {
    GateId(argmax(logits) as u8)
}
