use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Readout that scores class `g` by the sum of its contiguous block of
/// inputs, divided by `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSumLayer {
    pub classes: usize,
    pub tau: f64,
}

impl GroupSumLayer {
    pub fn new(classes: usize, tau: f64) -> Result<Self> {
        let layer = Self { classes, tau };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 {
            return Err(Error::Config("group sum needs at least one class".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(alloc::format!("group sum tau must be > 0, got {}", self.tau)));
        }
        Ok(())
    }

    pub fn group_size(&self, len: usize) -> Result<usize> {
        if len == 0 || !len.is_multiple_of(self.classes) {
            return Err(Error::GroupSize {
                len,
                classes: self.classes,
            });
        }
        Ok(len / self.classes)
    }

    pub(crate) fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        let size = x.len() / self.classes;
        for (o, group) in out.iter_mut().zip(x.chunks(size)) {
            *o = group.iter().sum::<f64>() / self.tau;
        }
    }

    pub(crate) fn backward_into(&self, grad_scores: &[f64], grad_x: &mut [f64]) {
        let size = grad_x.len() / self.classes;
        for (g, chunk) in grad_scores.iter().zip(grad_x.chunks_mut(size)) {
            chunk.fill(g / self.tau);
        }
    }

    /// Integer class counts of a Boolean output vector.
    pub(crate) fn counts_into(&self, bits: &[u8], out: &mut [u32]) {
        let size = bits.len() / self.classes;
        for (o, group) in out.iter_mut().zip(bits.chunks(size)) {
            *o = group.iter().map(|&b| b as u32).sum();
        }
    }
}

pub fn group_sum(scores_in: &[f64], layer: &GroupSumLayer) -> Result<Vec<f64>> {
    layer.group_size(scores_in.len())?;
    let mut out = vec![0.0; layer.classes];
    layer.forward_into(scores_in, &mut out);
    Ok(out)
}
