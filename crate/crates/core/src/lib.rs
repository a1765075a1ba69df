//! Segmentation of free-text visit records built on domain concepts.
//!
//! The library covers the full pipeline: term extraction and C-value
//! ranking ([`terms`]), longest-match concept annotation ([`corpus`]),
//! GloVe concept embeddings and visit vectors ([`embedding`]), analogy
//! evaluation ([`analogy`]), k-means / Ward clustering ([`cluster`]),
//! and interpretation artifacts such as cluster profiles, correspondence
//! analysis, PCA and t-SNE projections ([`analysis`]). The [`pipeline`]
//! module chains the stages; [`synth`] generates seeded synthetic corpora
//! for end-to-end testing.

pub mod analogy;
pub mod analysis;
pub mod cluster;
pub mod corpus;
pub mod embedding;
pub mod pipeline;
pub mod synth;
pub mod terms;

mod error;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
