//! Training engine for a four-stream multimodal classifier whose per-task
//! loss weights are learned by policy-gradient controllers inside a
//! population search.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`], [`nn`], [`loss`], [`optim`] — a minimal deterministic
//!   f64 tensor/network engine with hand-derived gradients.
//! - [`model`] — the shared-trunk multi-branch classifier with per-branch
//!   losses plus a fusion loss over concatenated branch features.
//! - [`controller`] — per-task categorical policies over discrete logit
//!   steps, updated from population rewards.
//! - [`search`] — the outer loop: sample weight configurations, train one
//!   replica per configuration for an epoch, keep the best, update the
//!   controllers.
//! - [`data`] — synthetic multimodal generation with closed-form
//!   single-modality Bayes accuracy, CSV ingestion, patient-level splits.
//! - [`metrics`] — confusion-matrix metrics and model evaluation.
//! - [`checkpoint`] — exact round-trip parameter dumps and manifests.

pub mod checkpoint;
pub mod controller;
pub mod data;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod optim;
pub mod search;
pub mod seeding;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
