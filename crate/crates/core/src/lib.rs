//! Temporal link prediction for intermittently connected contact networks.
//!
//! The pipeline records which node pairs were in contact during each of `T`
//! consecutive time slices, collapses those snapshots into one
//! recency-weighted matrix, and scores every pair with the Katz measure;
//! high scores flag pairs likely to share a link in the next period. The
//! crate also ships a community-mobility trace generator, an SVD
//! behavior-profile baseline, and an ROC/AUC evaluation harness.

pub mod baseline;
pub mod eval;
pub mod ingest;
pub mod katz;
pub mod sparse;
pub mod trace;
pub mod tvc;

pub use eval::{CandidateSet, EvalReport, Regime};
pub use katz::{CollapsedTensor, ScoreMatrix, ScoreMode};
pub use trace::{ContactEvent, LocationVisit, NodeRegistry, SnapshotTensor, WindowConfig};
