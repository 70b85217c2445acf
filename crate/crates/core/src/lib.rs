//! Random split trees: generation, path-length functionals and the numerical
//! objects that govern their asymptotics.
//!
//! The crate is organised by subsystem:
//!
//! * [`split`]: split-tree generation (recursive size trees and incremental
//!   item insertion) and path-length functionals.
//! * [`models`]: split-vector laws and named presets.
//! * [`constants`]: the limit constants (mean/variance of the size-biased log
//!   split, toll function, limit variance).
//! * [`fixpoint`]: the smoothing-transform fixed point, solved by iteration on
//!   empirical distributions.
//! * [`renewal`]: renewal function, overshoot classes and the top-of-tree sum.
//! * [`experiments`]: replicated Monte Carlo experiments and their checks.
//! * [`acceptance`]: the verification suite run by `splitree verify` and the
//!   `acceptance` test target.
//!
//! All randomness flows from explicit 64-bit seeds through [`rng::substream`],
//! so results do not depend on the number of worker threads.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod constants;
mod error;
pub mod experiments;
pub mod fixpoint;
pub mod models;
pub mod par;
pub mod quadrature;
pub mod renewal;
pub mod rng;
pub mod split;
pub mod stats;

pub use constants::{compute_constants, cost_c, ConstantsMethod, ConstantsReport};
pub use error::{Error, Result};
pub use fixpoint::{EmpiricalDistribution, FixpointRun};

pub use models::{ModelSpec, SplitLaw};
pub use split::{ItemTree, SizeTree, SplitParams, SplitVectorDraw};
