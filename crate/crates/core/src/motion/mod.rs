//! Motion field estimation from event voxel pairs and its confidence map.

mod confidence;
mod correlation;
mod estimate;
mod field;

pub use confidence::{consensus_confidence, ConfidenceParams};
pub use correlation::{build_correlation, CorrelationVolume};
pub use estimate::{estimate_flow, estimate_flow_with, FlowParams};
pub use field::{ConfidenceMap, FlowField};
