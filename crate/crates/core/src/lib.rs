//! Flow-based botnet detection and forensic attribution.
//!
//! The pipeline ingests flow-feature records, ranks features by information
//! gain, trains one of four classifiers (C4.5 tree, naive bayes, perceptron,
//! class-association rules), evaluates them with stratified cross-validation,
//! and joins attack predictions back to flow identifiers for per-host
//! forensic reporting.

pub mod classifiers;
pub mod cli;
pub mod error;
pub mod evaluate;
pub mod flow_model;
pub mod forensics;
pub mod ingest;
pub mod preprocess;

pub use error::{Error, Result};
