//! Subspace power iteration clustering.
//!
//! Graph neural network message passing with the per-layer activations and
//! weights stripped out collapses to a power iteration `(βI + M)^k X` with a
//! single aggregator `M`, followed by a small trained head. This crate
//! builds those aggregators, runs the propagation, trains the heads
//! (including the shared-weight nonlinear variants) and benchmarks them.
//!
//! | module | contents |
//! |--------|----------|
//! | [`graphdata`] | graphs, the on-disk directory format, SBM generator |
//! | [`aggregators`] | DAD, DA, AGNN, GAT-style and random aggregators; attention entropy |
//! | [`propagation`] | power iteration, teleport and polynomial propagation, dense spectral oracle |
//! | [`learn`] | heads, nonlinear variants, losses, hand-written gradients, Adam |
//! | [`bench`](mod@bench) | metrics, multi-run harness, CSV reports |
//! | [`cli`] | the `spic` command line |

pub mod aggregators;
pub mod bench;
pub mod cli;
pub mod error;
pub mod graphdata;
pub mod learn;
pub mod propagation;
pub mod sparse;

mod rng;

pub use error::{Result, SpicError};
