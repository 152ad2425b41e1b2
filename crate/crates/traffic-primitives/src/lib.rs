//! Unsupervised decomposition of two-vehicle driving encounters into
//! driving primitives.
//!
//! A driving encounter is a uniformly sampled time series of both vehicles'
//! positions and speeds. This crate segments each encounter into contiguous
//! behavioral building blocks ("driving primitives") with a sticky HDP-HMM
//! blocked Gibbs sampler, represents every primitive by a pair of normalized
//! cross-distance matrices over position and speed, and groups the resulting
//! feature vectors with k-means under within/between-distance model
//! selection.
//!
//! The stages are exposed as independent modules:
//!
//! - [`encounter`] — data model, CSV ingestion, local-frame projection and
//!   qualification of raw encounters;
//! - [`hdphmm`] — sticky HDP-HMM segmentation and primitive extraction;
//! - [`features`] — primitive rescaling, cross-distance matrices, feature
//!   vectors;
//! - [`clustering`] — k-means, cluster quality metrics and elbow sweeps;
//! - [`synth`] — synthetic labeled encounter generation and brute-force
//!   oracles for testing;
//! - [`pipeline`] — the end-to-end ingest → segment → featurize → cluster →
//!   report pipeline used by the `traffic-primitives` CLI.
//!
//! See the crate `examples/` directory for one runnable example per stage.

pub mod clustering;
pub mod encounter;
mod error;
pub mod features;
pub mod hdphmm;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
