//! Procedural generation engine built around typed compute graphs.
//!
//! Assets are [`ir::Graph`]s assembled one primitive at a time by
//! [`ir::GraphBuilder`]. Randomness enters only through an explicit
//! [`rng::RandomStream`] handed to a [`sampler::SamplerFn`], which lets the
//! [`tracer`] recover both the path a seed took and the full space of paths
//! without evaluating any field. [`eval`] interprets graphs over point
//! batches, and [`scene`] / [`gt`] turn materials and meshes into rooms,
//! camera trajectories and ground-truth frames.

pub mod analytics;
pub mod catalog;
pub mod dataset;
pub mod eval;
pub mod gt;
pub mod io;
pub mod ir;
pub mod materials;
pub mod math;
pub mod mesh;
pub mod noise;
pub mod rng;
pub mod sampler;
pub mod scene;
pub mod tracer;
pub mod transpiler;

pub use rng::RandomStream;
pub use ir::{Graph, GraphBuilder, NodeId, OutRef, Value, ValueKind};

