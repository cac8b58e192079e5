//! Gaze-behaviour analytics for collaborative-learning video.
//!
//! The engine consumes per-frame detections (head boxes, object boxes and
//! gaze points), keeps persistent seat identities, maps every gaze point to
//! a peer, an object or nothing, and scores the resulting behaviour labels
//! against annotations.

pub mod analytics;
pub mod assignment;
pub mod baselines;
pub mod commands;
pub mod gaze;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod seating;
pub mod simulator;
