//! Decentralized nonconvex finite-sum optimization on a simulated network.
//!
//! The crate models `n` agents connected by an undirected graph. Each agent
//! holds a shard of the training data and a local copy of the parameters;
//! agents exchange information only through a doubly-stochastic mixing
//! matrix `W`, one multiplication by `W` being one communication round.
//!
//! Three optimizers are provided in [`algorithms`]:
//!
//! * DESTRESS: stochastic recursive (SARAH-type) gradients in an inner loop,
//!   gradient tracking in an outer loop, and several gossip rounds per
//!   communication step (optionally Chebyshev-accelerated).
//! * GT-SARAH and DSGD as baselines.
//!
//! All of them account for communication rounds and per-agent incremental
//! first-order oracle (IFO) calls exactly.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the command line live in the companion `destress-sim` crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod algorithms;
pub mod data;
pub mod error;
pub mod matrix;
pub mod mixing;
pub mod model;
pub mod rng;
pub mod topology;

pub use error::{Error, Result};
pub use matrix::Mat;
