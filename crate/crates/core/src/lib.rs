//! Event classification for basketball video from global and collective
//! motion patterns (GCMP).
//!
//! A semantic basketball event spans three stages: the preparation
//! (pre-event), the occurrence (event-occ) and the aftermath (post-event).
//! This crate classifies events by exploiting what each stage is good for:
//!
//! * dense optical flow between consecutive frames, colorized into GCMP
//!   images, feeds a CNN+LSTM five-class classifier on event-occ segments;
//! * a second CNN+LSTM two-class classifier on pre-event segments
//!   disambiguates layups from other two-point shots, which share their
//!   occ-stage motion;
//! * a per-frame CNN on raw post-event frames votes success vs failure;
//! * the results fuse through a Kronecker product into an 11-way event
//!   vector (five base events x success/failure, plus steal).
//!
//! Everything is trainable at desk scale on the bundled synthetic event
//! generator, deterministic under a single seed, and checked against
//! independent oracles in the test suite.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod flow;
pub mod models;
pub mod ontology;
pub mod pipeline;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
