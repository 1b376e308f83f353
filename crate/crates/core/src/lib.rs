//! Incomplete multi-view clustering.
//!
//! Every view gets its own autoencoder. Training first fits each view on its
//! own observed rows, then jointly aligns views on two levels:
//!
//! * samples observed in both views of a pair are pulled to cosine similarity
//!   one ([`alignment`]);
//! * per-view k-means prototypes are matched across views by a permutation
//!   and pulled together ([`prototype`]).
//!
//! Missing embeddings are then filled by cross-view nearest-neighbour
//! transfer ([`imputation`]), views are concatenated and clustered with
//! k-means, and the result is scored with ACC / NMI / pairwise F
//! ([`metrics`]). [`pipeline`] wires the stages together.

pub mod alignment;
pub mod data;
pub mod error;
pub mod imputation;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod prototype;
pub mod seed;

pub use data::{MaskSpec, MultiViewDataset, PairObservedIndex};
pub use error::{Error, ParseErrorKind, Result};
pub use imputation::{EmbeddingSet, Provenance};
pub use metrics::ClusteringResult;
pub use pipeline::{LossMode, RunReport, TrainConfig};
pub use prototype::{AlignmentState, PrototypeSet};
