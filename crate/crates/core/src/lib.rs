//! Token-agnostic adversarial perturbations in a text classifier's
//! embedding space.
//!
//! This crate trains a single universal perturbation vector that, added to
//! every token embedding of a frozen text classifier, drives its accuracy
//! down across inputs. Around that core it provides:
//!
//! - a small differentiable classifier (mean-pooled embeddings + two-layer
//!   tanh MLP) with hand-derived exact gradients, trainable as the attack
//!   target ([`model`]);
//! - projected gradient ascent for the perturbation under an lp-norm budget,
//!   plus per-token and random baselines ([`perturb`]);
//! - attack-efficacy and neighborhood-preservation metrics ([`metrics`]);
//! - adversarial text generation by nearest-neighbor token replacement
//!   ([`advgen`]);
//! - a TSV data pipeline, deterministic splits and stratified subsampling
//!   ([`text`]), and versioned artifact files ([`io`], [`report`]).
//!
//! Everything is deterministic given a seed: repeated runs produce
//! byte-identical artifacts.

pub mod advgen;
pub mod error;
pub mod hash;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod perturb;
pub mod report;
pub mod rng;
pub mod text;

pub use error::{Error, Result};
