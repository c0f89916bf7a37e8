//! Event-driven anytime propagation of dense semantic features.
//!
//! Events are binned into voxel grids, a motion field and its log-precision
//! confidence are estimated from consecutive voxels, and keyframe features are
//! forward-splatted to any timestamp inside the keyframe gap. Synthetic scenes
//! with analytic ground truth drive the benchmarks.

pub mod bench;
pub mod error;
pub mod event;
pub mod exec;
pub mod memory;
pub mod motion;
pub mod pipeline;
pub mod scene;
pub mod warp;

pub use error::{Error, Result};
pub use exec::Exec;
