//! Cross-modal re-ranking over precomputed embeddings.
//!
//! The crate is organised around a dense row-major [`Matrix`] and a few
//! families of operations on it:
//!
//! - [`dense`]: cosine similarity, per-row top-k selection, row-stochastic
//!   normalisation and matrix products.
//! - [`hhcr`]: the two-stage heterogeneous / homogeneous consistency
//!   re-ranker that turns a visible set and an infrared set of embeddings
//!   into a refined cross-modal similarity matrix.
//! - [`baselines`]: plain cosine retrieval, k-reciprocal re-ranking and
//!   expanded cross neighbourhood (ECN) re-ranking.
//! - [`metrics`]: CMC, mAP and mINP for re-identification style retrieval.
//! - [`dataio`]: the FEAT embedding file format and a seeded synthetic
//!   two-modality generator.
//! - [`cli`]: the `crossrank` command line front end.

pub mod baselines;
pub mod cli;
pub mod dataio;
pub mod dense;
mod error;
pub mod hhcr;
pub mod metrics;

pub use dataio::{FeatureSet, Modality, SynthSpec};
pub use dense::Matrix;
pub use error::{Error, FormatError, Result};
pub use hhcr::HhcrParams;
pub use metrics::{EvalReport, ScoreOrder};
