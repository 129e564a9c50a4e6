//! Counterfactual explanations generated by reusing the k nearest
//! explanation cases of a dataset, plus the benchmark harness used to
//! evaluate them.
//!
//! An explanation case is a pair of real instances from different classes
//! that differ in only a few features. For a target instance, the nearest
//! cases of the target's class point at unlike classes whose members can
//! lend their values on a handful of features; every resulting
//! counterfactual is built only from observed values.

pub mod classifier;
pub mod cli;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod eval;
pub mod report;
pub mod scaling;
pub mod seed;
pub mod xc;

pub use error::{Error, Result};
