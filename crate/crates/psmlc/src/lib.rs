//! Deterministic training lab for partially supervised multi-label
//! classification.
//!
//! The crate trains small multi-label classifiers on data whose label
//! vectors may have missing entries, using maximum-entropy MixUp
//! augmentation: missing labels are filled with 0.5, pairs of samples are
//! mixed with a convex weight drawn from `Uniform(alpha, 1)`, and the loss
//! is masked to the classes labeled in the base sample. Everything is
//! seeded and single-threaded, so identical configurations reproduce
//! identical results byte for byte.

pub mod augment;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod labels;
pub mod loss;
pub mod metrics;
pub mod network;
pub mod optim;
pub mod rng;
pub mod runner;
pub mod tensor;

pub use error::{Error, Result};
