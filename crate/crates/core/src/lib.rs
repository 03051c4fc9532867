//! Query-aware multi-video summarization.
//!
//! The pipeline scores candidate keyframes with a web-image-weighted,
//! non-negative sparse-coding objective ([`solver`]), groups videos into
//! query events by fusing a tag-text graph ([`textgraph`]) with a
//! near-duplicate visual graph ([`visgraph`]) and cutting the result
//! ([`events`]), then renders an event/keyframe presentation ([`render`])
//! and scores summaries against annotators ([`eval`]).

pub mod corpus;
pub mod error;
pub mod eval;
pub mod events;
pub mod graph;
pub mod kmeans;
pub mod linalg;
pub mod render;
pub mod solver;
pub mod synth;
pub mod textgraph;
pub mod visgraph;

pub use error::{Error, ErrorClass, Result};
