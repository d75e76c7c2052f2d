//! Open set intrusion recognition on KDD-format connection records.
//!
//! The crate trains two one-vs-rest RBF SVM recognizers over exploit-level
//! labels: a Platt-calibrated baseline whose probabilities saturate far from
//! the data, and a Weibull-calibrated W-SVM whose per-class probabilities are
//! gated by a one-class support model and abate away from the training data.
//! [`eval`] scores both under closed-set and open-set protocols, including the
//! cost-of-unknown curve.

pub mod artifact;
pub mod calibration;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod openset;
pub mod par;
pub mod pipeline;
pub mod preprocess;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
pub use par::Execution;
