//! scall-core: budget-constrained dynamic embedding sizing for streaming
//! recommendation.
//!
//! A chronological interaction stream is cut into segments. For each segment
//! a soft actor-critic policy emits an action `(w, alpha_u, alpha_v)`: the
//! share of a hard parameter budget given to users, and two shape parameters
//! of a heavy-tailed distribution from which per-entity embedding-size
//! fractions are sampled. Sizes are realized through a prefix mask over a
//! dense embedding table, the masked table feeds a light graph-convolution
//! recommender trained with pairwise ranking, and the measured top-k quality
//! relative to a reference snapshot becomes the policy reward.
//!
//! Modules map onto the pipeline stages:
//!
//! - [`corpus`]: ingestion, segmentation, train/test splits, reservoirs
//! - [`table`]: masked embedding table and its sparse on-disk image
//! - [`graph`] / [`recommender`]: propagation, BPR training, top-k metrics
//! - [`alloc`]: action -> integer sizes under the budget
//! - [`nn`] / [`sac`] / [`state`]: the embedding-size policy
//! - [`config`] / [`harness`] / [`report`]: experiment orchestration
//!
//! All numeric kernels are generic over [`Scalar`] (`f32` or `f64`).

pub mod alloc;
pub mod config;
pub mod corpus;
pub mod error;
pub mod graph;
pub mod harness;
pub mod nn;
pub mod recommender;
pub mod report;
pub mod rng;
pub mod sac;
pub mod scalar;
pub mod state;
pub mod table;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Masked table in single precision (matches the 4-byte export payload).
pub type MaskedEmbeddingTable32 = table::MaskedEmbeddingTable<f32>;
/// Masked table in double precision (default for training runs).
pub type MaskedEmbeddingTable64 = table::MaskedEmbeddingTable<f64>;
/// Interaction graph in single precision.
pub type InteractionGraph32 = graph::InteractionGraph<f32>;
/// Interaction graph in double precision.
pub type InteractionGraph64 = graph::InteractionGraph<f64>;
/// Policy agent in single precision.
pub type SacAgent32 = sac::SacAgent<f32>;
/// Policy agent in double precision.
pub type SacAgent64 = sac::SacAgent<f64>;
