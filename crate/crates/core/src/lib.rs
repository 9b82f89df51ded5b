//! Desk-scale transfer-learning laboratory.
//!
//! The crate trains small dual-head networks on synthetic domains with
//! controllable bias and compares four transfer modes: pretraining on the
//! source domain, plain fine-tuning on the target domain, joint optimization
//! of both losses everywhere ("intermediate"), and soft fine-tuning, where the
//! source loss is weighted by `1 - alpha` with `alpha = min(1, epoch / E)` and
//! training stops shortly after the weight hits zero.
//!
//! Everything is built on a minimal reverse-mode autodiff engine
//! ([`autodiff`]) that self-verifies against central finite differences, and
//! every stochastic component is seeded so whole experiments replay
//! bit-identically.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
