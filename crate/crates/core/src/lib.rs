//! Evaluation of discrete speech units against gold phone alignments.
//!
//! The pipeline synchronizes gold phones with a unit stream on the unit frame
//! grid, accumulates a phone/unit contingency table, derives a unit→phoneme
//! assignment (many-to-one or one-to-one) and scores the result with PNMI,
//! phone error rate, boundary F1 / R-value and ABX discriminability.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root pin the common `f64` instantiations.

pub mod abx;
pub mod assignment;
pub mod corpus_io;
pub mod error;
pub mod framesync;
pub mod inventory;
pub mod metrics;
pub mod runner;
pub mod scalar;
pub mod synth;
pub mod time;

pub use assignment::{Assignment, AssignmentKind};
pub use corpus_io::{Manifest, PhoneCorpus, PhoneSegment, Track, UnitCorpus, UnitId};
pub use error::{Error, Result};
pub use framesync::ContingencyTable;
pub use inventory::{PhonemeClass, PhonemeInventory};
pub use metrics::PerBreakdown;
pub use runner::EvalReport;
pub use scalar::Scalar;
pub use time::{FrameRate, Micros};

/// Boundary precision/recall/F1/R-value in double precision.
pub type BoundaryScore = metrics::BoundaryScore<f64>;
/// Substitution class-confusion matrix in double precision.
pub type ClassConfusion = metrics::ClassConfusion<f64>;
/// Single-precision frame matrix, the usual storage for model features.
pub type FrameMatrix = abx::FrameMatrix<f32>;
/// Double-precision frame matrix.
pub type FrameMatrix64 = abx::FrameMatrix<f64>;
/// Item representation over single-precision features.
pub type Representation = abx::Representation<f32>;
/// ABX result over double-precision scores.
pub type AbxResult = abx::AbxResult<f64>;
