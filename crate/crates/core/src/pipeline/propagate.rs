use crate::error::{Error, Result};
use crate::event::{voxelize, EventStream, VoxelGrid};
use crate::exec::Exec;
use crate::memory::{mem_enhance_vacated, MemoryBank};
use crate::motion::{consensus_confidence, estimate_flow_with, ConfidenceMap, FlowField};
use crate::pipeline::{
    decode_labels, encode_keyframe_with, ConfidenceSource, HoleFill, KeyframeState, PipelineOptions,
};
use crate::scene::{IntensityFrame, LabelMap};
use crate::warp::{refine_masked, softmax_splat_with, FeatureMap};

/// Prediction at `t + dt` with every intermediate exposed.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionState {
    pub feature: FeatureMap,
    pub labels: LabelMap,
    pub flow: FlowField,
    pub confidence: ConfidenceMap,
    pub coverage: Vec<bool>,
    pub dt: u64,
}

impl PredictionState {
    pub fn hole_fraction(&self) -> f64 {
        let holes = self.coverage.iter().filter(|&&c| !c).count();
        holes as f64 / self.coverage.len().max(1) as f64
    }
}

/// Checks that the stream covers `[start, end)`.
fn require_coverage(events: &EventStream, start: u64, end: u64) -> Result<()> {
    let missing = |a: u64, b: u64| Err(Error::InsufficientData { missing_start: a, missing_end: b });
    match events.coverage() {
        None => missing(start, end),
        Some((c0, _)) if c0 > start => missing(start, c0.min(end)),
        Some((_, c1)) if c1 < end => missing(c1.max(start), end),
        Some(_) => Ok(()),
    }
}

fn voxel(events: &EventStream, t0: u64, t1: u64, bins: usize) -> Result<VoxelGrid> {
    voxelize(&events.slice(t0, t1), (t0, t1), bins, events.dims())
}

/// Flow from `t_a` to `t_b` and the voxel of `E_{t_a -> t_b}` it was judged on.
/// The estimator compares `E_{prev -> t_a}` with `E_{t_a -> t_b}`.
fn motion(
    events: &EventStream,
    prev: u64,
    t_a: u64,
    t_b: u64,
    opts: &PipelineOptions,
    exec: Exec,
) -> Result<(FlowField, ConfidenceMap)> {
    let after = voxel(events, t_a, t_b, opts.bins)?;
    let flow = match &opts.flow_override {
        Some(p) => p.flow(t_a, t_b)?,
        None => {
            let before = voxel(events, prev, t_a, opts.bins)?;
            estimate_flow_with(exec, &before, &after, &opts.flow)?
        }
    };
    let (h, w) = events.dims();
    if flow.dims() != (h, w) {
        return Err(Error::invalid(format!("flow is {}x{} but the sensor is {h}x{w}", flow.height, flow.width)));
    }
    let confidence = match &opts.confidence_source {
        ConfidenceSource::Consensus => consensus_confidence(&after, &flow, &opts.confidence)?,
        ConfidenceSource::Constant(c) => ConfidenceMap::constant(h, w, *c),
        ConfidenceSource::Fixed(m) => {
            if m.dims() != (h, w) {
                return Err(Error::invalid("fixed confidence map has the wrong size"));
            }
            m.clone()
        }
    };
    Ok((flow, confidence))
}

/// Splat, refine and optionally attend over memory.
fn warp_stage(
    feature: &FeatureMap,
    flow: &FlowField,
    confidence: &ConfidenceMap,
    opts: &PipelineOptions,
    bank: Option<&MemoryBank>,
    timestamp: u64,
    exec: Exec,
) -> Result<(FeatureMap, Vec<bool>)> {
    let splat = softmax_splat_with(exec, feature, flow, confidence)?;
    let mut out = refine_masked(&splat.output, &splat.coverage, opts.refine_passes)?;
    let bank = bank.filter(|b| !b.is_empty());
    // Holes know nothing about the present; with memory, history decides there.
    if opts.hole_fill == HoleFill::Uniform || bank.is_some() {
        let n = out.plane_len();
        let uniform = 1.0 / out.channels as f64;
        for i in (0..n).filter(|&i| !splat.coverage[i]) {
            for c in 0..out.channels {
                out.data[c * n + i] = uniform;
            }
        }
    }
    if let Some(bank) = bank {
        let source = decode_labels(feature);
        let vacated: Vec<Option<usize>> =
            splat.coverage.iter().zip(&source.labels).map(|(&covered, &l)| (!covered).then_some(l as usize)).collect();
        out = mem_enhance_vacated(exec, bank, &out, &vacated)?;
    }
    Ok((out.with_timestamp(timestamp), splat.coverage))
}

fn check_offset(state: &KeyframeState, dt: u64, events: &EventStream) -> Result<()> {
    if dt == 0 || dt > state.interval {
        return Err(Error::invalid(format!("offset {dt} us outside (0, {}] us", state.interval)));
    }
    if events.dims() != state.labels.dims() {
        return Err(Error::invalid("event sensor size differs from the keyframe"));
    }
    Ok(())
}

fn propagate_inner(
    state: &KeyframeState,
    events: &EventStream,
    dt: u64,
    opts: &PipelineOptions,
    bank: Option<&MemoryBank>,
) -> Result<PredictionState> {
    check_offset(state, dt, events)?;
    opts.validate()?;
    let t = state.t;
    require_coverage(events, t.saturating_sub(state.interval), t + dt)?;
    let exec = Exec::global();
    let prev = t.saturating_sub(dt);
    let (flow, confidence) = motion(events, prev, t, t + dt, opts, exec)?;
    let bank = if opts.memory { bank } else { None };
    let (feature, coverage) = warp_stage(&state.feature, &flow, &confidence, opts, bank, t + dt, exec)?;
    let labels = decode_labels(&feature);
    Ok(PredictionState { feature, labels, flow, confidence, coverage, dt })
}

/// Propagates the keyframe features to `state.t + dt` without memory.
///
/// The flow is estimated from the equal-length voxel pair
/// `E_{t-dt -> t}`, `E_{t -> t+dt}`; confidence is judged on the latter.
pub fn propagate(
    state: &KeyframeState,
    events: &EventStream,
    dt: u64,
    opts: &PipelineOptions,
) -> Result<PredictionState> {
    propagate_inner(state, events, dt, opts, None)
}

/// Warps to `t + dt_mid` and then again to `t + interval`.
///
/// The second flow comes from the voxels of `E_{t -> t+dt_mid}` and
/// `E_{t+dt_mid -> t+interval}`. Memory is not consulted.
pub fn two_stage_align(
    state: &KeyframeState,
    events: &EventStream,
    dt_mid: u64,
    opts: &PipelineOptions,
) -> Result<FeatureMap> {
    let interval = state.interval;
    if dt_mid == 0 || dt_mid >= interval {
        return Err(Error::invalid(format!("midpoint {dt_mid} us outside (0, {interval}) us")));
    }
    let t = state.t;
    require_coverage(events, t.saturating_sub(interval), t + interval)?;
    let first = propagate_inner(state, events, dt_mid, opts, None)?;
    let exec = Exec::global();
    let (flow, confidence) = motion(events, t, t + dt_mid, t + interval, opts, exec)?;
    let (feature, _) = warp_stage(&first.feature, &flow, &confidence, opts, None, t + interval, exec)?;
    Ok(feature)
}

/// Default midpoint for [`two_stage_align`].
pub fn default_midpoint(interval: u64) -> u64 {
    interval / 2
}

/// A propagation session: the latest keyframe plus the memory bank.
#[derive(Debug)]
pub struct Pipeline {
    opts: PipelineOptions,
    bank: MemoryBank,
    keyframe: Option<KeyframeState>,
}

impl Pipeline {
    pub fn new(opts: PipelineOptions) -> Result<Self> {
        opts.validate()?;
        let bank = MemoryBank::new(opts.capacity, opts.temperature)?;
        Ok(Pipeline { opts, bank, keyframe: None })
    }

    pub fn options(&self) -> &PipelineOptions {
        &self.opts
    }

    pub fn bank(&self) -> &MemoryBank {
        &self.bank
    }

    pub fn keyframe(&self) -> Option<&KeyframeState> {
        self.keyframe.as_ref()
    }

    /// Encodes a new keyframe and, with memory on, stores its features.
    pub fn observe_keyframe(
        &mut self,
        frame: &IntensityFrame,
        labels: &LabelMap,
        interval: u64,
    ) -> Result<&KeyframeState> {
        let state = encode_keyframe_with(frame, labels, interval, self.opts.smoothing)?;
        if self.opts.memory {
            self.bank.push(state.feature.clone(), state.t)?;
        }
        Ok(self.keyframe.insert(state))
    }

    pub fn propagate(&self, events: &EventStream, dt: u64) -> Result<PredictionState> {
        let state = self.keyframe.as_ref().ok_or_else(|| Error::invalid("no keyframe observed yet"))?;
        propagate_inner(state, events, dt, &self.opts, Some(&self.bank))
    }
}
