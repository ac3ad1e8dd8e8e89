//! Two-stage user-defined keyword spotting over phoneme posteriorgrams.
//!
//! Stage 1 runs a streaming CTC trellis per keyword to find candidate
//! segments; stage 2 verifies each candidate against an enrollment
//! prototype. The [`metrics`] module scores the resulting trials.

pub mod cascade;
pub mod ctc_search;
pub mod error;
pub mod matcher;
pub mod metrics;
pub mod phoneme;
pub mod posterior;

pub use error::{Error, Result};
