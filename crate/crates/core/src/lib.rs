//! Geometry-aware dataset generation toolkit.
//!
//! The crate covers the non-neural half of a video spatial-reasoning data
//! pipeline:
//!
//! * [`geometry`]: pinhole intrinsics, SE(3) poses, homogeneous projection
//!   matrices and the relative transform between adjacent frames.
//! * [`repe`]: sinusoidal relative positional encoding of those transforms
//!   and additive fusion with externally supplied semantic embeddings.
//! * [`scene_graph`]: camera-calibrated frame graphs with distance and
//!   obstruction gated edges, A* trajectory search and endpoint sampling.
//! * [`instruction`]: motion labels, instruction templates and shot cuts.
//! * [`dataset`]: canonical line-delimited triplet records, manifests and
//!   summary statistics.
//! * [`gas`]: grounded attention score evaluation.
//! * [`noise`]: forward diffusion noising and variance schedules.
//! * [`pipeline`]: end-to-end orchestration used by the `geopipe` binary.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default). Every such loop also has a sequential path selectable at
//! runtime through [`Parallelism`], and outputs are identical in both modes.

pub mod dataset;
pub mod formats;
pub mod gas;
pub mod geometry;
pub mod instruction;
pub mod noise;
mod par;
pub mod pipeline;
pub mod repe;
pub mod scene_graph;
pub mod synthetic;

pub use par::Parallelism;
