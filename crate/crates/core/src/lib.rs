//! Numerical core for physical-layer deep-learning experiments.
//!
//! Everything here is pure computation on owned values: dense real and
//! complex matrices, a seeded generator, constellation search, a small
//! feedforward network with manual backpropagation, an autoencoder link with
//! an explicit channel layer, OFDM channel estimators, matrix-based Rényi
//! entropies, and neural-tangent-kernel Gram matrices.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod chanest;
pub mod constellation;
pub mod endtoend;
mod error;
pub mod infoflow;
pub mod neural;
pub mod ntk;
pub mod numkit;

pub use error::{Error, Result};
