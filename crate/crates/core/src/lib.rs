//! `fpsim-core`: a deterministic federated-learning poisoning testbed.
//!
//! The crate simulates FedAvg-style training with a population of benign
//! clients and a single adversary controlling a fixed set of malicious
//! clients. Attackers can run the data-free attacks DFA-R (filter-layer
//! synthesis) and DFA-G (generator synthesis) or one of the omniscient
//! baselines; the server aggregates through a configurable robust rule,
//! including the reference-set defense RefD.
//!
//! Modules:
//! - [`nn`]: parameter vectors, classifier, filter layer, generator, SGD
//! - [`data`]: IDX loading, synthetic blobs, Dirichlet partitioning, reference sets
//! - [`federation`]: client selection, local training, FedAvg, the round loop
//! - [`attacks`]: DFA-R, DFA-G, LIE, Fang, Min-Max/Min-Sum, random weights
//! - [`defenses`]: (m)Krum, Bulyan, trimmed mean, median, RefD
//! - [`metrics`]: round records, ASR, DPR, overhead estimates
//! - [`config`]: the experiment configuration file format

pub mod attacks;
pub mod config;
pub mod data;
pub mod defenses;
pub mod error;
pub mod federation;
pub mod metrics;
pub mod nn;
pub mod rng;

pub use error::{Error, ParseError, Result};
