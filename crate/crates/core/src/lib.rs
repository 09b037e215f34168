//! Dilated recurrent neural networks, built from scratch.
//!
//! The crate is `no_std` (it needs `alloc`) and holds everything that is pure
//! computation:
//!
//! * [`numeric`]: dense matrices, the counter-based RNG, cross-entropy,
//!   RMSProp and a central-difference gradient checker.
//! * [`cells`]: vanilla / LSTM / GRU steps in dilated form (one recurrent
//!   input) and regular-skip form (two recurrent inputs), with analytic
//!   backward passes.
//! * [`model`]: multi-layer stacks with exponential dilation schedules,
//!   the interleaved and phase-split evaluation routes, the fusion head and
//!   full backpropagation through time.
//! * [`graph`]: cyclic-graph models of recurrent architectures, a
//!   breadth-first shortest-path oracle and the closed-form memory-capacity
//!   measures it is checked against.
//! * [`tasks`]: deterministic generators for the copy-memory and pixel
//!   sequence benchmarks plus an IDX decoder.
//!
//! File IO, checkpoints, configuration and the command line live in the
//! companion `dilrnn` crate.
#![no_std]

extern crate alloc;

pub mod cells;
pub mod error;
pub mod graph;
pub mod model;
pub mod numeric;
pub mod tasks;

pub use error::{Error, Result};
