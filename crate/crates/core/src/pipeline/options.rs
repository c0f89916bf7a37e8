use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::event::DEFAULT_BINS;
use crate::motion::{ConfidenceMap, ConfidenceParams, FlowField, FlowParams};
use crate::pipeline::DEFAULT_SMOOTHING;
use crate::scene::{oracle_flow, SceneConfig};
use crate::warp::DEFAULT_REFINE_PASSES;

/// Attention temperature used when propagating with memory. Sharper than the
/// bank default so that confident predictions dominate their own history.
pub const PIPELINE_TEMPERATURE: f64 = 0.1;

/// Source of the motion field between two timestamps, replacing the event
/// based estimator.
pub trait FlowProvider: Send + Sync {
    fn flow(&self, t_a: u64, t_b: u64) -> Result<FlowField>;
}

/// A fixed field, returned regardless of the requested span.
impl FlowProvider for FlowField {
    fn flow(&self, _t_a: u64, _t_b: u64) -> Result<FlowField> {
        Ok(self.clone())
    }
}

/// Analytic scene motion.
impl FlowProvider for SceneConfig {
    fn flow(&self, t_a: u64, t_b: u64) -> Result<FlowField> {
        oracle_flow(self, t_a, t_b)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub enum ConfidenceSource {
    /// Event/flow consensus.
    #[default]
    Consensus,
    /// The same log-precision everywhere.
    Constant(f64),
    Fixed(ConfidenceMap),
}

/// What uncovered pixels hold after splatting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HoleFill {
    /// Uniform class distribution: unknown, deferring to memory when present.
    #[default]
    Uniform,
    /// The keyframe's own features at that pixel.
    Source,
}

#[derive(Clone)]
pub struct PipelineOptions {
    pub memory: bool,
    pub capacity: usize,
    pub temperature: f64,
    pub refine_passes: usize,
    pub hole_fill: HoleFill,
    pub bins: usize,
    /// Uniform mixing weight of keyframe features.
    pub smoothing: f64,
    pub flow: FlowParams,
    pub confidence: ConfidenceParams,
    pub confidence_source: ConfidenceSource,
    pub flow_override: Option<Arc<dyn FlowProvider>>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            memory: true,
            capacity: crate::memory::DEFAULT_CAPACITY,
            temperature: PIPELINE_TEMPERATURE,
            refine_passes: DEFAULT_REFINE_PASSES,
            hole_fill: HoleFill::Uniform,
            bins: DEFAULT_BINS,
            smoothing: DEFAULT_SMOOTHING,
            flow: FlowParams::default(),
            confidence: ConfidenceParams::default(),
            confidence_source: ConfidenceSource::Consensus,
            flow_override: None,
        }
    }
}

impl fmt::Debug for PipelineOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PipelineOptions")
            .field("memory", &self.memory)
            .field("capacity", &self.capacity)
            .field("temperature", &self.temperature)
            .field("refine_passes", &self.refine_passes)
            .field("hole_fill", &self.hole_fill)
            .field("bins", &self.bins)
            .field("smoothing", &self.smoothing)
            .field("flow", &self.flow)
            .field("confidence", &self.confidence)
            .field("confidence_source", &self.confidence_source)
            .field("flow_override", &self.flow_override.is_some())
            .finish()
    }
}

impl PipelineOptions {
    pub fn with_flow_override(mut self, provider: impl FlowProvider + 'static) -> Self {
        self.flow_override = Some(Arc::new(provider));
        self
    }

    pub fn with_confidence(mut self, source: ConfidenceSource) -> Self {
        self.confidence_source = source;
        self
    }

    pub fn with_memory(mut self, on: bool) -> Self {
        self.memory = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity == 0 {
            return Err(Error::invalid("memory capacity must be >= 1"));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::invalid("memory temperature must be positive"));
        }
        if self.bins < 2 {
            return Err(Error::invalid("voxel grids need at least two bins"));
        }
        if !(0.0..=1.0).contains(&self.smoothing) {
            return Err(Error::invalid("smoothing must lie in [0, 1]"));
        }
        if self.flow.iters == 0 || self.flow.radius == 0 || self.flow.patch.is_multiple_of(2) {
            return Err(Error::invalid(format!("invalid flow parameters {:?}", self.flow)));
        }
        self.confidence.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses `key = value` lines; `#` starts a comment. Unlisted keys keep
    /// their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut o = PipelineOptions::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse_line(lineno, format!("expected key = value, got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::parse_line(lineno, format!("'{key}' needs a number, got '{v}'")))
            };
            let int = |v: &str| -> Result<usize> {
                v.parse::<usize>()
                    .map_err(|_| Error::parse_line(lineno, format!("'{key}' needs an integer, got '{v}'")))
            };
            match key {
                "memory" => {
                    o.memory = match value {
                        "on" | "true" | "1" => true,
                        "off" | "false" | "0" => false,
                        _ => return Err(Error::parse_line(lineno, format!("memory must be on or off, got '{value}'"))),
                    }
                }
                "capacity" => o.capacity = int(value)?,
                "tau" => o.temperature = num(value)?,
                "refine_passes" => o.refine_passes = int(value)?,
                "holes" => {
                    o.hole_fill = match value {
                        "uniform" => HoleFill::Uniform,
                        "source" => HoleFill::Source,
                        _ => {
                            return Err(Error::parse_line(
                                lineno,
                                format!("holes must be uniform or source, got '{value}'"),
                            ))
                        }
                    }
                }
                "bins" => o.bins = int(value)?,
                "smoothing" => o.smoothing = num(value)?,
                "flow_radius" => o.flow.radius = int(value)?,
                "flow_patch" => o.flow.patch = int(value)?,
                "flow_iters" => o.flow.iters = int(value)?,
                "flow_smooth" => o.flow.smooth_passes = int(value)?,
                "density_radius" => o.confidence.density_radius = int(value)?,
                "alpha" => o.confidence.alpha = num(value)?,
                "beta" => o.confidence.beta = num(value)?,
                "s_min" => o.confidence.s_min = num(value)?,
                "s_max" => o.confidence.s_max = num(value)?,
                "tv_scale" => o.confidence.tv_scale = num(value)?,
                "motion_ref" => o.confidence.motion_ref = num(value)?,
                "confidence" => {
                    o.confidence_source = match value {
                        "consensus" => ConfidenceSource::Consensus,
                        v => ConfidenceSource::Constant(num(v)?),
                    }
                }
                _ => return Err(Error::parse_line(lineno, format!("unknown option '{key}'"))),
            }
        }
        o.validate()?;
        Ok(o)
    }

    /// Serializes the file-backed settings. Overrides other than a constant
    /// confidence are not representable and are omitted.
    pub fn to_config_string(&self) -> String {
        let conf = match &self.confidence_source {
            ConfidenceSource::Constant(c) => format!("{c}"),
            _ => "consensus".to_string(),
        };
        let c = &self.confidence;
        format!(
            "memory = {}\ncapacity = {}\ntau = {}\nrefine_passes = {}\nholes = {}\nbins = {}\nsmoothing = {}\n\
             flow_radius = {}\nflow_patch = {}\nflow_iters = {}\nflow_smooth = {}\n\
             density_radius = {}\nalpha = {}\nbeta = {}\ns_min = {}\ns_max = {}\ntv_scale = {}\nmotion_ref = {}\n\
             confidence = {conf}\n",
            if self.memory { "on" } else { "off" },
            self.capacity,
            self.temperature,
            self.refine_passes,
            match self.hole_fill {
                HoleFill::Uniform => "uniform",
                HoleFill::Source => "source",
            },
            self.bins,
            self.smoothing,
            self.flow.radius,
            self.flow.patch,
            self.flow.iters,
            self.flow.smooth_passes,
            c.density_radius,
            c.alpha,
            c.beta,
            c.s_min,
            c.s_max,
            c.tv_scale,
            c.motion_ref,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        let o =
            PipelineOptions::parse("memory = off\ntau = 0.5  # sharper\nflow_iters = 3\nconfidence = 1.5\n").unwrap();
        assert!(!o.memory);
        assert_eq!(o.temperature, 0.5);
        assert_eq!(o.flow.iters, 3);
        assert_eq!(o.confidence_source, ConfidenceSource::Constant(1.5));
        let again = PipelineOptions::parse(&o.to_config_string()).unwrap();
        assert_eq!(again.to_config_string(), o.to_config_string());
    }

    #[test]
    fn parse_errors_carry_line() {
        let err = PipelineOptions::parse("memory = on\nbogus = 1\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(PipelineOptions::parse("flow_iters = 0").is_err());
        assert!(PipelineOptions::parse("alpha = x").is_err());
    }
}
