use alloc::string::String;

/// Errors raised by the core engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("arity {0} is outside the supported range 1..=6")]
    Arity(usize),
    #[error("expected length {expected}, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("cannot wire {arity} distinct inputs from a layer of width {in_dim}")]
    Wiring { in_dim: usize, arity: usize },
    #[error("invalid gate id {0}")]
    GateId(usize),
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("{len} outputs cannot be split into {classes} equal groups")]
    GroupSize { len: usize, classes: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid truth table string: {0}")]
    Parse(String),
    #[error("netlist invalid: {0}")]
    Netlist(String),
    #[error("backward pass called without a cached forward pass")]
    MissingCache,
    #[error("loss diverged at step {step} (layer {layer}, max |coeff| = {max_abs_coeff})")]
    Diverged {
        step: u64,
        layer: usize,
        max_abs_coeff: f64,
    },
    #[error("metrics sink failed: {0}")]
    Sink(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
