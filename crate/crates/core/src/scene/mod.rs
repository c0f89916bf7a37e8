//! Synthetic translating-shape scenes with analytic labels and flow, and the
//! contrast-threshold event camera model driven by them.

mod config;
mod render;
mod simulate;

pub use config::{SceneConfig, SceneObject, Shape, DEFAULT_NUM_CLASSES};
pub use render::{oracle_flow, render_scene, IntensityFrame, LabelMap};
pub use simulate::{simulate_events, EventSimulator, DEFAULT_CONTRAST, DEFAULT_DT_SIM_US};
