//! Numerical core for cross-modal knowledge distillation experiments.
//!
//! Temperature softmax and top-N lookup ([`prob`]), confidence-sorted top-N
//! calibration error ([`calibration`]), supervision targets ([`targets`]),
//! distillation losses with analytic gradients ([`losses`]), post-hoc
//! temperature scaling ([`temperature`]), alignment deduplication and
//! rearrangement ([`alignment`]), and a desk-scale multi-head classifier
//! ([`toy`], [`experiment`]).
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod alignment;
pub mod calibration;
pub mod error;
pub mod experiment;
pub mod losses;
mod math;
pub mod prob;
pub mod targets;
pub mod temperature;
pub mod toy;

pub use error::{Error, Result};
pub use math::{fixed6, LOG_FLOOR};
pub use prob::{log_softmax_t, softmax_t, top_n, LogitVector, ProbVector};
