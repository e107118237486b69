//! ICU hyperkalemia risk pipeline.
//!
//! End-to-end machinery for predicting moderate hyperkalemia (K >= 6
//! mEq/L) from first-ICU-day observations: clinical event ingestion and
//! validation, KDIGO AKI staging, rule-based outcome labeling, scenario
//! cohort construction, day-1 feature engineering with kNN imputation,
//! three interpretable classifiers (logistic regression, random forest,
//! gradient-boosted trees), lead-time AUC evaluation, and exact Shapley
//! feature attribution. A seeded synthetic cohort generator with planted
//! risk signal makes the whole pipeline verifiable without restricted
//! clinical databases.

pub mod cli;
pub mod clinical;
pub mod config;
pub mod error;
pub mod eval;
pub mod explain;
pub mod features;
pub mod ingest;
pub mod models;
pub mod pipeline;
pub mod seed;
pub mod time;

pub use error::{Error, Result};
pub use time::Timestamp;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
