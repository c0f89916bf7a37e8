use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::bench::{perturb_flow, BenchReport, BenchRow, ConfusionMatrix};
use crate::error::{Error, Result};
use crate::event::{voxelize, EventStream, DEFAULT_BINS};
use crate::motion::{consensus_confidence, ConfidenceParams};
use crate::pipeline::{decode_labels, encode_keyframe, encode_labels, ConfidenceSource, Pipeline, PipelineOptions};
use crate::scene::{
    oracle_flow, render_scene, simulate_events, IntensityFrame, LabelMap, SceneConfig, DEFAULT_CONTRAST,
    DEFAULT_DT_SIM_US,
};
use crate::warp::{refine_masked, warp_domain, FeatureMap, Semantics, WarpMode, DEFAULT_REFINE_PASSES};

/// Keyframe interval of the anytime and ablation benches.
pub const BENCH_INTERVAL_US: u64 = 100_000;
/// Keyframes of the anytime bench; predictions start from the last one.
pub const ANYTIME_KEYFRAMES_US: [u64; 2] = [100_000, 200_000];
/// Offsets 10..=100 ms.
pub const ANYTIME_OFFSETS_US: [u64; 10] =
    [10_000, 20_000, 30_000, 40_000, 50_000, 60_000, 70_000, 80_000, 90_000, 100_000];
pub const MEMORY_GAPS_US: [u64; 4] = [50_000, 200_000, 400_000, 800_000];
/// Keyframes observed before predicting across the last gap.
pub const MEMORY_KEYFRAMES: u64 = 4;
pub const ABLATION_OFFSETS_US: [u64; 5] = [20_000, 40_000, 60_000, 80_000, 100_000];
/// Flow noise of the confidence ablation, applied on event-free pixels.
pub const CONFIDENCE_NOISE_PX: f64 = 2.0;
/// Flow noise of the warping-domain ablation, applied everywhere.
pub const DOMAIN_NOISE_PX: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Keyframe labels reused unchanged.
    LfrBaseline,
    Ours,
    OursNoMemory,
    OursNoConfidence,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::LfrBaseline, Method::Ours, Method::OursNoMemory, Method::OursNoConfidence];

    pub fn name(self) -> &'static str {
        match self {
            Method::LfrBaseline => "lfr_baseline",
            Method::Ours => "ours",
            Method::OursNoMemory => "ours_no_memory",
            Method::OursNoConfidence => "ours_no_confidence",
        }
    }

    fn options(self) -> PipelineOptions {
        let base = PipelineOptions::default();
        match self {
            Method::OursNoMemory => base.with_memory(false),
            Method::OursNoConfidence => base.with_confidence(ConfidenceSource::Constant(0.0)),
            _ => base,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| Error::invalid(format!("unknown method '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AblationKind {
    WarpDomain,
    MemoryGap,
    Confidence,
}

impl AblationKind {
    pub const ALL: [AblationKind; 3] = [AblationKind::WarpDomain, AblationKind::MemoryGap, AblationKind::Confidence];

    pub fn name(self) -> &'static str {
        match self {
            AblationKind::WarpDomain => "warp_domain",
            AblationKind::MemoryGap => "memory_gap",
            AblationKind::Confidence => "confidence",
        }
    }
}

impl FromStr for AblationKind {
    type Err = Error;

    /// Accepts both `warp_domain` and `warp-domain` spellings.
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        AblationKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown ablation kind '{s}'")))
    }
}

fn confusion(pred: &LabelMap, gt: &LabelMap, classes: usize) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(classes);
    cm.add(pred, gt)?;
    Ok(cm)
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn simulate(scene: &SceneConfig, t1: u64) -> Result<EventStream> {
    simulate_events(scene, 0, t1, DEFAULT_CONTRAST, DEFAULT_DT_SIM_US)
}

fn check_offsets(offsets: &[u64], limit: u64) -> Result<()> {
    if offsets.is_empty() {
        return Err(Error::invalid("no offsets to evaluate"));
    }
    if let Some(dt) = offsets.iter().find(|&&dt| dt == 0 || dt > limit) {
        return Err(Error::invalid(format!("offset {dt} us outside (0, {limit}] us")));
    }
    Ok(())
}

/// mIoU against analytic ground truth as a function of the offset from the
/// last keyframe, for each method.
pub fn anytime_curve(scene: &SceneConfig, methods: &[Method], offsets: &[u64], seed: u64) -> Result<BenchReport> {
    check_offsets(offsets, BENCH_INTERVAL_US)?;
    let last = ANYTIME_KEYFRAMES_US[ANYTIME_KEYFRAMES_US.len() - 1];
    let horizon = last + offsets.iter().copied().max().unwrap_or(0);
    let events = simulate(scene, horizon)?;
    let k = scene.num_classes;
    let mut report = BenchReport::new(
        "anytime",
        seed,
        k,
        format!("{}\n{}", scene.to_config_string(), PipelineOptions::default().to_config_string()),
    );
    let truth: Vec<LabelMap> =
        offsets.iter().map(|&dt| render_scene(scene, last + dt).map(|(_, l)| l)).collect::<Result<_>>()?;
    for &method in methods {
        if method == Method::LfrBaseline {
            let (_, key) = render_scene(scene, last)?;
            for (&dt, gt) in offsets.iter().zip(&truth) {
                let start = Instant::now();
                let cm = confusion(&key, gt, k)?;
                report.rows.push(BenchRow::new(method.name(), dt, cm, 0.0, elapsed_ms(start)));
            }
            continue;
        }
        let mut pipe = Pipeline::new(method.options())?;
        for &t in &ANYTIME_KEYFRAMES_US {
            let (frame, labels) = render_scene(scene, t)?;
            pipe.observe_keyframe(&frame, &labels, BENCH_INTERVAL_US)?;
        }
        for (&dt, gt) in offsets.iter().zip(&truth) {
            let start = Instant::now();
            let pred = pipe.propagate(&events, dt)?;
            let cm = confusion(&pred.labels, gt, k)?;
            report.rows.push(BenchRow::new(method.name(), dt, cm, pred.hole_fraction(), elapsed_ms(start)));
        }
    }
    Ok(report)
}

pub fn ablation_run(kind: AblationKind, scene: &SceneConfig, seed: u64) -> Result<BenchReport> {
    match kind {
        AblationKind::WarpDomain => warp_domain_bench(scene, seed),
        AblationKind::MemoryGap => memory_gap_bench(scene, seed),
        AblationKind::Confidence => confidence_bench(scene, seed),
    }
}

/// Relabels intensities by the nearest per-class mean of the keyframe.
fn relabel_by_intensity(intensity: &FeatureMap, frame: &IntensityFrame, labels: &LabelMap) -> LabelMap {
    let k = labels.num_classes;
    let mut sum = vec![0.0; k];
    let mut count = vec![0usize; k];
    for (&l, &v) in labels.labels.iter().zip(&frame.values) {
        sum[l as usize] += v;
        count[l as usize] += 1;
    }
    let means: Vec<(u32, f64)> =
        (0..k).filter(|&c| count[c] > 0).map(|c| (c as u32, sum[c] / count[c] as f64)).collect();
    let out = intensity
        .data
        .iter()
        .map(|&v| {
            let mut best = means[0];
            for &m in &means[1..] {
                if (m.1 - v).abs() < (best.1 - v).abs() {
                    best = m;
                }
            }
            best.0
        })
        .collect();
    LabelMap { labels: out, height: labels.height, width: labels.width, timestamp: intensity.timestamp, num_classes: k }
}

/// Image, hard-label and soft-feature warping under a noisy flow.
fn warp_domain_bench(scene: &SceneConfig, seed: u64) -> Result<BenchReport> {
    let t = BENCH_INTERVAL_US;
    let offsets = ABLATION_OFFSETS_US;
    let events = simulate(scene, t + BENCH_INTERVAL_US)?;
    let (frame, labels) = render_scene(scene, t)?;
    let k = scene.num_classes;
    let (h, w) = scene.dims();
    let image = FeatureMap::new(frame.values.clone(), 1, h, w, t, Semantics::Intensity)?;
    let onehot = encode_labels(&labels, 0.0)?;
    let soft = encode_keyframe(&frame, &labels, BENCH_INTERVAL_US)?.feature;
    let mut report = BenchReport::new(
        "warp_domain",
        seed,
        k,
        format!("{}\nnoise_px = {DOMAIN_NOISE_PX}\n", scene.to_config_string()),
    );
    let mut rows: Vec<Vec<BenchRow>> = vec![Vec::new(); 3];
    for &dt in &offsets {
        let (_, gt) = render_scene(scene, t + dt)?;
        let flow = perturb_flow(&oracle_flow(scene, t, t + dt)?, DOMAIN_NOISE_PX, None, seed ^ dt)?;
        let voxel = voxelize(&events.slice(t, t + dt), (t, t + dt), DEFAULT_BINS, (h, w))?;
        let conf = consensus_confidence(&voxel, &flow, &ConfidenceParams::default())?;
        for (slot, mode) in WarpMode::ALL.into_iter().enumerate() {
            let start = Instant::now();
            let (pred, holes) = match mode {
                WarpMode::Image => {
                    let r = warp_domain(mode, &image, &flow, &conf)?;
                    (relabel_by_intensity(&r.output, &frame, &labels), r.hole_fraction())
                }
                WarpMode::Segmentation => {
                    let r = warp_domain(mode, &onehot, &flow, &conf)?;
                    (decode_labels(&r.output), r.hole_fraction())
                }
                WarpMode::Feature => {
                    let r = warp_domain(mode, &soft, &flow, &conf)?;
                    let refined = refine_masked(&r.output, &r.coverage, DEFAULT_REFINE_PASSES)?;
                    (decode_labels(&refined), r.hole_fraction())
                }
            };
            let cm = confusion(&pred, &gt, k)?;
            rows[slot].push(BenchRow::new(mode.name(), dt, cm, holes, elapsed_ms(start)));
        }
    }
    report.rows = rows.into_iter().flatten().collect();
    Ok(report)
}

/// Prediction across one full keyframe gap, with and without memory, for a
/// growing gap length. Flow is the scene oracle so only memory differs.
fn memory_gap_bench(scene: &SceneConfig, seed: u64) -> Result<BenchReport> {
    let k = scene.num_classes;
    let mut report = BenchReport::new(
        "memory_gap",
        seed,
        k,
        format!("{}\nkeyframes = {MEMORY_KEYFRAMES}\n", scene.to_config_string()),
    );
    let mut rows: Vec<Vec<BenchRow>> = vec![Vec::new(); 2];
    for &gap in &MEMORY_GAPS_US {
        let last = MEMORY_KEYFRAMES * gap;
        let events = simulate(scene, last + gap)?;
        let (_, gt) = render_scene(scene, last + gap)?;
        for (slot, (name, memory)) in [("memory", true), ("no_memory", false)].into_iter().enumerate() {
            let start = Instant::now();
            let opts = PipelineOptions::default().with_memory(memory).with_flow_override(scene.clone());
            let mut pipe = Pipeline::new(opts)?;
            for i in 1..=MEMORY_KEYFRAMES {
                let (frame, labels) = render_scene(scene, i * gap)?;
                pipe.observe_keyframe(&frame, &labels, gap)?;
            }
            let pred = pipe.propagate(&events, gap)?;
            let cm = confusion(&pred.labels, &gt, k)?;
            rows[slot].push(BenchRow::new(name, gap, cm, pred.hole_fraction(), elapsed_ms(start)));
        }
    }
    report.rows = rows.into_iter().flatten().collect();
    Ok(report)
}

/// Consensus against constant confidence when the flow is corrupted wherever
/// no events fired.
fn confidence_bench(scene: &SceneConfig, seed: u64) -> Result<BenchReport> {
    let t = BENCH_INTERVAL_US;
    let events = simulate(scene, t + BENCH_INTERVAL_US)?;
    let (frame, labels) = render_scene(scene, t)?;
    let state = encode_keyframe(&frame, &labels, BENCH_INTERVAL_US)?;
    let k = scene.num_classes;
    let (h, w) = scene.dims();
    let mut report = BenchReport::new(
        "confidence",
        seed,
        k,
        format!("{}\nnoise_px = {CONFIDENCE_NOISE_PX}\n", scene.to_config_string()),
    );
    let mut rows: Vec<Vec<BenchRow>> = vec![Vec::new(); 2];
    for &dt in &ABLATION_OFFSETS_US {
        let (_, gt) = render_scene(scene, t + dt)?;
        let voxel = voxelize(&events.slice(t, t + dt), (t, t + dt), DEFAULT_BINS, (h, w))?;
        let silent: Vec<bool> = voxel.energy().iter().map(|&e| e == 0.0).collect();
        let flow = perturb_flow(&oracle_flow(scene, t, t + dt)?, CONFIDENCE_NOISE_PX, Some(&silent), seed ^ dt)?;
        for (slot, (name, source)) in
            [("consensus", ConfidenceSource::Consensus), ("constant", ConfidenceSource::Constant(0.0))]
                .into_iter()
                .enumerate()
        {
            let start = Instant::now();
            let opts =
                PipelineOptions::default().with_memory(false).with_confidence(source).with_flow_override(flow.clone());
            let pred = crate::pipeline::propagate(&state, &events, dt, &opts)?;
            let cm = confusion(&pred.labels, &gt, k)?;
            rows[slot].push(BenchRow::new(name, dt, cm, pred.hole_fraction(), elapsed_ms(start)));
        }
    }
    report.rows = rows.into_iter().flatten().collect();
    Ok(report)
}
