//! Visual recommendation toolkit: pairwise preference ranking over visual
//! item features, recurrent category-demand models with temporal contexts,
//! and a two-part ranker that aggregates the two signals.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod demand;
pub mod error;
pub mod eval;
pub mod features;
pub mod kmeans;
pub mod linalg;
pub mod preference;
pub mod ranker;
pub mod synth;

pub use error::{Error, Result};
