//! Algorithms behind a benchmark for machine-generated text (MGT) detection
//! and attribution.
//!
//! Everything here is pure computation over in-memory data and builds without
//! `std` (an allocator is required). File formats, the scoring-service client,
//! the on-disk score cache and the command line live in the `mgtbench` crate.
//!
//! Module map:
//!
//! - [`corpus`]: documents, moderation rules, stratified splits, keyword
//!   profiles and generation prompts.
//! - [`scorer`]: the token-scoring contract and a Laplace-smoothed unigram
//!   reference backend.
//! - [`detectors`]: the metric detectors (log-likelihood, rank, log-rank, LRR,
//!   entropy, GLTR buckets, analytic Fast-DetectGPT, Binoculars).
//! - [`decision`]: F1-optimal thresholds plus logistic and linear SVM models.
//! - [`neural`]: the supervised reference classifier (hashed bag of words and
//!   one hidden layer).
//! - [`continual`]: class-incremental updates (Normal, LwF, iCaRL, BiC, Combine).
//! - [`bench`]: detector/experiment registries and the evaluation protocols.
//! - [`synthetic`]: seeded corpora used by the protocol and acceptance suites.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bench;
pub mod continual;
pub mod corpus;
pub mod decision;
pub mod detectors;
pub mod math;
pub mod metrics;
pub mod neural;
pub mod scorer;
pub mod seed;
pub mod synthetic;
