//! Directed dependency estimation between channels of a multivariate time
//! series by non-uniform embedding and conditional transfer entropy.
//!
//! The pipeline for one dataset is:
//!
//! 1. [`MultivariateSeries`] holds the channels; [`nue::prepare_series`]
//!    normalizes them and adds a tiny jitter to break ties.
//! 2. For every target channel, [`nue::run_nue`] greedily builds an
//!    embedding from lagged candidates of all channels.
//! 3. [`nue::dependency_matrix`] turns the embeddings into a binary
//!    dependency matrix and a matrix of conditional transfer entropies.
//!
//! [`simgen`] and [`benchmark`] provide synthetic systems with known
//! coupling and the metrics to score recovered networks.

pub mod benchmark;
pub mod data;
pub mod error;
pub mod estimators;
pub mod neighbors;
pub mod nue;
pub mod prediction;
pub mod simgen;

pub use data::{Candidate, EmbeddingState, MultivariateSeries};
pub use error::{Error, Result};
pub use estimators::{digamma, ksg_cmi, ksg_cte, ksg_mi, KsgParams};
pub use neighbors::{Metric, NeighborIndex};
pub use nue::{dependency_matrix, run_nue, Algorithm, DependencyResult, NueConfig, NueTrace};
