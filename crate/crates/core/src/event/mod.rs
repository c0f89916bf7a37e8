//! Event streams, file codecs and the triangular-kernel voxel grid.

mod codec;
mod stream;
mod voxel;

pub use codec::{read_events, write_events, EventFormat};
pub use stream::{Event, EventStream};
pub use voxel::{accumulate, voxelize, VoxelGrid, DEFAULT_BINS};
