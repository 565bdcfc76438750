//! Detection, characterization, and explanation of tiny coordinated groups
//! in large attributed graphs.
//!
//! The pipeline jointly embeds a directed connection graph and a sparse
//! user-attribute matrix, clusters the embedding, and flags clusters whose
//! induced edge probability and size indicate coordination. Companion
//! modules rank each cluster's signature attributes ([`creed`]), measure
//! pairwise cluster interactions ([`meso`]), generate ground-truthed
//! synthetic instances from a coupled block model ([`synthgen`]), and score
//! detection output against planted truth ([`evalkit`]).
//!
//! Every stage is deterministic given a single 64-bit seed (see [`seeds`])
//! and scales linearly in the number of nonzero entries of the inputs.

pub mod creed;
pub mod dense;
pub mod embed;
pub mod error;
pub mod evalkit;
pub mod flag;
pub mod graphio;
pub mod kmeans;
pub mod meso;
pub mod report;
pub mod seeds;
pub mod sparse;
pub mod synthgen;

pub use error::{Error, Result};
