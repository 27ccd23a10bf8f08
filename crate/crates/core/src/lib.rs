//! Build citation and text similarity networks from a document corpus, cluster
//! them with the Leiden algorithm under the constant Potts model, and measure
//! how well topics from a hierarchical taxonomy are represented by the clusters.
//!
//! The crate is organised as a pipeline:
//!
//! * [`corpus`] loads and validates documents and the topic taxonomy,
//! * [`simnet`] builds the two similarity networks (extended direct citation
//!   and BM25 text similarity),
//! * [`leiden`] clusters a network at a given resolution and cleans the result,
//! * [`topics`] turns raw document annotations into the final topic set
//!   (ancestor expansion, size filtering, redundancy removal, branch filtering,
//!   size bins),
//! * [`effectiveness`] computes coverage-based cluster selection, Purity, ICC
//!   and the citation-vs-text ratio metrics,
//! * [`report`] aggregates records into branch rankings, position counts and
//!   box-plot summaries,
//! * [`pipeline`] wires the stages into cacheable commands behind a config
//!   file, and [`synth`] generates seeded synthetic corpora for testing.

pub mod corpus;
pub mod effectiveness;
pub mod error;
pub mod leiden;
pub mod pipeline;
pub mod report;
pub mod simnet;
pub mod synth;
pub mod topics;

pub use error::{Error, Result};
