//! The differentiable LUT node.
//!
//! Inputs in `[0, 1]` are mapped to `[-1, 1]` by `b̃(x) = 2x - 1`, the Walsh
//! polynomial is evaluated with real coefficients, and the sign is replaced by
//! `σ(l / τ)`. Gumbel–Sigmoid sampling adds `g₁ - g₂` to the logit before the
//! sigmoid; the difference of two standard Gumbels is drawn directly as one
//! Logistic(0, 1) variate.

use alloc::vec;
use alloc::vec::Vec;

use rand::distr::{Distribution, Open01};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boolean::{WalshCoeffs, MAX_ARITY};
use crate::math::{ln, sigmoid};
use crate::{Error, Result};

const MAX_COEFFS: usize = 1 << MAX_ARITY;

/// How a node turns its logit into an activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxMode {
    #[default]
    Deterministic,
    GumbelSigmoid,
    /// Hard 0/1 forward from thresholding the soft value at 0.5; the backward
    /// pass uses the soft value's derivative.
    StraightThrough,
}

impl RelaxMode {
    /// Whether a forward pass in this mode draws noise.
    pub fn samples_noise(self, params: &RelaxParams) -> bool {
        match self {
            RelaxMode::Deterministic => false,
            RelaxMode::GumbelSigmoid => true,
            RelaxMode::StraightThrough => params.gumbel_enabled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxParams {
    /// Sigmoid temperature τ.
    pub tau_relax: f64,
    /// Adds logistic noise to the straight-through forward.
    #[serde(default)]
    pub gumbel_enabled: bool,
    /// Straight-through backward uses the noisy soft value instead of the
    /// noiseless one.
    #[serde(default)]
    pub ste_noisy_backward: bool,
    #[serde(default)]
    pub rng_seed: u64,
}

impl Default for RelaxParams {
    fn default() -> Self {
        Self {
            tau_relax: 1.0,
            gumbel_enabled: false,
            ste_noisy_backward: false,
            rng_seed: 0,
        }
    }
}

impl RelaxParams {
    pub fn with_tau(tau_relax: f64) -> Self {
        Self {
            tau_relax,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau_relax > 0.0 && self.tau_relax.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(alloc::format!(
                "tau_relax must be positive, got {}",
                self.tau_relax
            )))
        }
    }

    /// Noise that enters the backward pass for `mode`, given the forward noise.
    fn backward_noise(&self, mode: RelaxMode, forward_noise: f64) -> f64 {
        match mode {
            RelaxMode::Deterministic => 0.0,
            RelaxMode::GumbelSigmoid => forward_noise,
            RelaxMode::StraightThrough if self.ste_noisy_backward => forward_noise,
            RelaxMode::StraightThrough => 0.0,
        }
    }
}

/// `2x - 1` with `x` clamped to `[0, 1]`.
#[inline]
pub fn b_tilde(x: f64) -> f64 {
    2.0 * x.clamp(0.0, 1.0) - 1.0
}

/// Fills `out[t] = ∏_{j ∈ t} b̃(x_j)` for every subset index `t`.
#[inline]
pub(crate) fn basis_products(x: &[f64], out: &mut [f64]) {
    out[0] = 1.0;
    for (j, &xj) in x.iter().enumerate() {
        let b = b_tilde(xj);
        let half = 1 << j;
        for t in 0..half {
            out[t | half] = out[t] * b;
        }
    }
}

/// Runs `f` on a zeroed stack buffer of length `len` (at most `2^MAX_ARITY`),
/// sized so that small arities do not pay for clearing the largest buffer.
#[inline(always)]
fn with_scratch<T>(len: usize, f: impl FnOnce(&mut [f64]) -> T) -> T {
    if len <= 4 {
        f(&mut [0.0; 4][..len])
    } else if len <= 16 {
        f(&mut [0.0; 16][..len])
    } else {
        f(&mut [0.0; MAX_COEFFS][..len])
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(coeffs: &WalshCoeffs, x: &[f64]) -> Result<()> {
    if coeffs.arity() == x.len() {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected: coeffs.arity(),
            actual: x.len(),
        })
    }
}

/// Logit of the relaxed polynomial at `x ∈ [0, 1]^n`.
#[inline]
pub(crate) fn logit_slice(coeffs: &[f64], x: &[f64]) -> f64 {
    with_scratch(coeffs.len(), |phi| {
        basis_products(x, phi);
        dot(coeffs, phi)
    })
}

pub fn relaxed_logit(coeffs: &WalshCoeffs, x: &[f64]) -> Result<f64> {
    check_dims(coeffs, x)?;
    Ok(logit_slice(coeffs.values(), x))
}

pub fn relaxed_eval(coeffs: &WalshCoeffs, x: &[f64], params: &RelaxParams) -> Result<f64> {
    Ok(sigmoid(relaxed_logit(coeffs, x)? / params.tau_relax))
}

/// Logistic(0, 1) quantile: `ln(u / (1 - u))`.
#[inline]
pub fn logistic_from_uniform(u: f64) -> f64 {
    ln(u / (1.0 - u))
}

/// One draw of `g₁ - g₂` for independent standard Gumbels.
#[inline]
pub fn gumbel_noise<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = Open01.sample(rng);
    logistic_from_uniform(u)
}

pub fn gumbel_eval<R: Rng + ?Sized>(
    coeffs: &WalshCoeffs,
    x: &[f64],
    params: &RelaxParams,
    rng: &mut R,
) -> Result<f64> {
    let l = relaxed_logit(coeffs, x)?;
    Ok(sigmoid((l + gumbel_noise(rng)) / params.tau_relax))
}

/// Result of one node forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeForward {
    /// Activation passed downstream.
    pub value: f64,
    /// `σ((l + noise) / τ)` before any hard threshold.
    pub soft: f64,
    /// Noise added to the logit (zero when none was drawn).
    pub noise: f64,
}

/// Applies `mode` to an already computed logit.
#[inline]
pub(crate) fn activate<R: Rng + ?Sized>(
    logit: f64,
    mode: RelaxMode,
    params: &RelaxParams,
    rng: &mut R,
) -> NodeForward {
    let noise = if mode.samples_noise(params) {
        gumbel_noise(rng)
    } else {
        0.0
    };
    activate_with_noise(logit, mode, params, noise)
}

/// Applies `mode` to a logit with a given noise draw.
#[inline]
pub(crate) fn activate_with_noise(logit: f64, mode: RelaxMode, params: &RelaxParams, noise: f64) -> NodeForward {
    let z = (logit + noise) / params.tau_relax;
    let soft = sigmoid(z);
    let value = match mode {
        // σ(z) ≥ 0.5 ⟺ z ≥ 0; ties go to 1.
        RelaxMode::StraightThrough => {
            if z >= 0.0 {
                1.0
            } else {
                0.0
            }
        }
        _ => soft,
    };
    NodeForward { value, soft, noise }
}

pub fn node_forward<R: Rng + ?Sized>(
    coeffs: &WalshCoeffs,
    x: &[f64],
    mode: RelaxMode,
    params: &RelaxParams,
    rng: &mut R,
) -> Result<NodeForward> {
    let l = relaxed_logit(coeffs, x)?;
    Ok(activate(l, mode, params, rng))
}

/// Activation slopes below this are flushed to zero. Saturated nodes would
/// otherwise push whole backward passes into subnormal arithmetic.
pub(crate) const SLOPE_FLOOR: f64 = 1e-150;

/// Derivative of the (soft) activation with respect to the logit.
#[inline]
pub(crate) fn activation_slope(logit: f64, mode: RelaxMode, params: &RelaxParams, noise: f64) -> f64 {
    let s = sigmoid((logit + params.backward_noise(mode, noise)) / params.tau_relax);
    let d = s * (1.0 - s) / params.tau_relax;
    if d < SLOPE_FLOOR {
        0.0
    } else {
        d
    }
}

/// Accumulates `upstream · ∂out/∂c` into `grad_coeffs` and
/// `upstream · ∂out/∂x` into `grad_x`.
#[inline]
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward_slice(
    coeffs: &[f64],
    x: &[f64],
    upstream: f64,
    mode: RelaxMode,
    params: &RelaxParams,
    noise: f64,
    grad_coeffs: &mut [f64],
    grad_x: &mut [f64],
) {
    with_scratch(coeffs.len(), |phi| {
        backward_with_basis(coeffs, x, phi, upstream, mode, params, noise, grad_coeffs, grad_x)
    })
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn backward_with_basis(
    coeffs: &[f64],
    x: &[f64],
    phi: &mut [f64],
    upstream: f64,
    mode: RelaxMode,
    params: &RelaxParams,
    noise: f64,
    grad_coeffs: &mut [f64],
    grad_x: &mut [f64],
) {
    basis_products(x, phi);
    let l = dot(coeffs, phi);
    let g = upstream * activation_slope(l, mode, params, noise);
    for (gc, p) in grad_coeffs.iter_mut().zip(phi.iter()) {
        *gc += g * p;
    }
    // ∂l/∂b̃_j = Σ_{S∋j} c_S ∏_{i∈S∖j} b̃_i, and ∂b̃/∂x = 2 inside the clamp.
    for (j, gx) in grad_x.iter_mut().enumerate() {
        if !(0.0..=1.0).contains(&x[j]) {
            continue;
        }
        let bit = 1 << j;
        let mut dl = 0.0;
        for t in 0..coeffs.len() {
            if t & bit != 0 {
                dl += coeffs[t] * phi[t ^ bit];
            }
        }
        *gx += g * 2.0 * dl;
    }
}

/// Gradients of one node output.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGrads {
    pub grad_coeffs: Vec<f64>,
    pub grad_x: Vec<f64>,
}

/// Analytic backward pass for a single node.
///
/// `cached_noise` is the noise returned by the matching forward pass; it is
/// required whenever `mode` draws noise.
pub fn node_backward(
    coeffs: &WalshCoeffs,
    x: &[f64],
    upstream: f64,
    mode: RelaxMode,
    params: &RelaxParams,
    cached_noise: Option<f64>,
) -> Result<NodeGrads> {
    check_dims(coeffs, x)?;
    let noise = match cached_noise {
        Some(n) => n,
        None if mode.samples_noise(params) => return Err(Error::MissingCache),
        None => 0.0,
    };
    let mut grads = NodeGrads {
        grad_coeffs: vec![0.0; coeffs.values().len()],
        grad_x: vec![0.0; x.len()],
    };
    backward_slice(
        coeffs.values(),
        x,
        upstream,
        mode,
        params,
        noise,
        &mut grads.grad_coeffs,
        &mut grads.grad_x,
    );
    Ok(grads)
}
