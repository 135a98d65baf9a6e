//! Dense MTTKRP with every word of communication accounted for.
//!
//! The crate bundles:
//! - [`tensor`]: dense tensor / factor-matrix types and a seeded generator
//!   for synthetic problems;
//! - [`seq`]: the direct-summation reference plus the unblocked and
//!   blocked sequential algorithms, traced instruction by instruction;
//! - [`memmodel`]: the two-level memory machine those traces run against;
//! - [`bounds`]: closed-form communication lower bounds and the
//!   combinatorial inequalities behind them;
//! - [`parsim`]: a deterministic distributed-memory simulator with bucket
//!   collectives and per-processor word counts;
//! - [`planner`]: block-size and processor-grid selection, the
//!   matrix-multiplication baseline model, and strong-scaling sweeps;
//! - [`io`]: the problem file format and synthetic problem specs.

pub mod bounds;
pub mod error;
pub mod io;
pub mod memmodel;
pub mod parsim;
pub mod planner;
pub mod seq;
pub mod tensor;

pub use error::{Error, Result};
