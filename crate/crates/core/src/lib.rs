//! Core library for the stability/plasticity benchmark harness.
//!
//! The pipeline stages live here as pure, deterministic functions:
//! ingest raw interaction data ([`data`]), inject an item-relabeling
//! concept shift ([`shift`]), produce temporal train/test splits
//! ([`split`]), train and rank with three recommenders ([`knn`],
//! [`bpr`], [`neumf`] behind the common [`model`] contract), score
//! holdouts ([`metrics`]), and assemble the stability/plasticity
//! report ([`protocol`]). [`synth`] generates seeded synthetic
//! datasets so the whole pipeline runs without any external data.
//!
//! Every randomized step takes an explicit 64-bit seed and uses the
//! ChaCha8 counter-based generator (see [`rng`]), so equal inputs give
//! byte-identical outputs on every platform.

pub mod bpr;
pub mod data;
pub mod error;
pub mod io;
pub mod knn;
pub mod metrics;
pub mod model;
pub mod neumf;
pub mod protocol;
pub mod rng;
pub mod shift;
pub mod split;
pub mod synth;

pub use error::{Result, SpError};
