//! Learning contextual value distributions from samples.
//!
//! A hidden distribution over weight vectors `v` in `[0,1]^d` produces a
//! reward `f(v, x)` for each context `x`. The learner fits a uniform
//! distribution on `k` vectors by minimizing a capped squared loss, and the
//! fitted model is then used to pick pricing, Pandora's box and stopping
//! policies.

pub mod error;
pub mod harness;
pub mod learner;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod policies;
pub mod selftest;
pub mod value_dist;

pub use error::{Error, Result};
pub use value_dist::DiscreteValueDistribution;
