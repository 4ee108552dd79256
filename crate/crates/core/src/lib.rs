//! Walsh-relaxed probabilistic look-up tables (WARP-LUTs).
//!
//! Every node of a network is an `n`-input Boolean function parameterized by
//! its `2^n` Walsh–Hadamard coefficients. During training the coefficients are
//! real-valued and the node output is relaxed through a sigmoid (optionally
//! with logistic/Gumbel noise, or with a straight-through hard forward). For
//! inference each node collapses to the truth table closest to its relaxed
//! polynomial, and the whole model hardens into an exact Boolean [`Netlist`].
//!
//! The crate is `no_std` (with `alloc`). The `std` feature only forwards to
//! dependencies; `parallel` enables batch-parallel training through rayon.
//!
//! Conventions shared by every module:
//!
//! * corner index `k` of an `n`-input table reads input 0 as the most
//!   significant bit, so `ID(A)` is `"0011"`;
//! * coefficient index `t` has bit `j` set iff input `j` belongs to the
//!   subset, so the 2-input order is `(c_∅, c_a, c_b, c_ab)`.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod boolean;
pub mod data;
pub mod dlgn;
mod error;
pub mod layers;
pub mod loss;
pub(crate) mod math;
pub mod netlist;
pub mod network;
pub mod optim;
pub mod relax;
pub mod rng;
pub mod train;

pub use boolean::{GateId, TruthTable, WalshCoeffs, MAX_ARITY};
pub use error::{Error, Result};
pub use netlist::{CircuitStats, Netlist};
pub use network::{Network, NetworkSpec};
pub use relax::{RelaxMode, RelaxParams};
pub use train::{MetricsRecord, TrainConfig};
