//! Keyframe encoding and anytime propagation to arbitrary offsets.

mod keyframe;
mod options;
mod propagate;

pub use keyframe::{
    decode_labels, encode_keyframe, encode_keyframe_with, encode_labels, KeyframeState, DEFAULT_SMOOTHING,
};
pub use options::{ConfidenceSource, FlowProvider, HoleFill, PipelineOptions, PIPELINE_TEMPERATURE};
pub use propagate::{default_midpoint, propagate, two_stage_align, Pipeline, PredictionState};
