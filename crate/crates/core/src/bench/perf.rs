use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::event::{voxelize, Event, EventStream, DEFAULT_BINS};
use crate::motion::{ConfidenceMap, FlowField};
use crate::warp::{softmax_splat, FeatureMap, Semantics};

/// Minimum wall time of one timed repetition.
const MIN_REP_SECONDS: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct PerfRep {
    pub pixels_per_s: f64,
    pub events_per_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerfReport {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub events: usize,
    pub reps: Vec<PerfRep>,
    /// FNV-1a over the splat output and voxel bits; independent of timing.
    pub checksum: u64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Coefficient of variation (population standard deviation over mean).
fn cv(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if mean == 0.0 {
        0.0
    } else {
        var.sqrt() / mean
    }
}

impl PerfReport {
    pub fn median_pixels_per_s(&self) -> f64 {
        median(self.reps.iter().map(|r| r.pixels_per_s).collect())
    }

    pub fn median_events_per_s(&self) -> f64 {
        median(self.reps.iter().map(|r| r.events_per_s).collect())
    }

    pub fn pixels_cv(&self) -> f64 {
        cv(&self.reps.iter().map(|r| r.pixels_per_s).collect::<Vec<_>>())
    }

    pub fn events_cv(&self) -> f64 {
        cv(&self.reps.iter().map(|r| r.events_per_s).collect::<Vec<_>>())
    }

    /// The first line is deterministic for fixed inputs; the rest are timings.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "checksum={:016x} size={}x{} channels={} events={}",
            self.checksum, self.height, self.width, self.channels, self.events
        );
        for (i, r) in self.reps.iter().enumerate() {
            let _ = writeln!(s, "rep={i} pixels_per_s={:.6} events_per_s={:.6}", r.pixels_per_s, r.events_per_s);
        }
        let _ = writeln!(
            s,
            "median pixels_per_s={:.6} events_per_s={:.6} cv_pixels={:.6} cv_events={:.6}",
            self.median_pixels_per_s(),
            self.median_events_per_s(),
            self.pixels_cv(),
            self.events_cv()
        );
        s
    }
}

fn fnv1a(hash: &mut u64, bytes: &[u8]) {
    for &b in bytes {
        *hash ^= b as u64;
        *hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
}

/// Times seconds per call of `f`, batching calls until a repetition lasts at
/// least [`MIN_REP_SECONDS`].
fn time_per_call(mut f: impl FnMut()) -> f64 {
    let mut calls = 1usize;
    loop {
        let start = Instant::now();
        for _ in 0..calls {
            f();
        }
        let secs = start.elapsed().as_secs_f64();
        if secs >= MIN_REP_SECONDS {
            return secs / calls as f64;
        }
        calls *= 2;
    }
}

/// Splat and voxelization throughput on seeded random inputs.
pub fn perf_splat(height: usize, width: usize, channels: usize, reps: usize, seed: u64) -> Result<PerfReport> {
    if height == 0 || width == 0 || channels == 0 || reps == 0 {
        return Err(Error::invalid("perf sizes and repetitions must be positive"));
    }
    if height > u16::MAX as usize || width > u16::MAX as usize {
        return Err(Error::invalid("perf frame exceeds the event coordinate range"));
    }
    let n = height * width;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let payload = FeatureMap::new(
        (0..channels * n).map(|_| rng.random::<f64>()).collect(),
        channels,
        height,
        width,
        0,
        Semantics::Generic,
    )?;
    let flow = FlowField::new(
        (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
        (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
        height,
        width,
    )?;
    let conf = ConfidenceMap::new((0..n).map(|_| rng.random_range(-6.0..6.0)).collect(), height, width)?;
    let count = 4 * n;
    let span = 100_000u64;
    let mut times: Vec<u64> = (0..count).map(|_| rng.random_range(0..span)).collect();
    times.sort_unstable();
    let events = times
        .into_iter()
        .map(|t| {
            Event::new(
                rng.random_range(0..width) as u16,
                rng.random_range(0..height) as u16,
                t,
                if rng.random::<bool>() { 1 } else { -1 },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let stream = EventStream::new(events, height, width)?;

    let splat = softmax_splat(&payload, &flow, &conf)?;
    let voxel = voxelize(&stream, (0, span), DEFAULT_BINS, (height, width))?;
    let mut checksum = 0xcbf2_9ce4_8422_2325u64;
    for v in &splat.output.data {
        fnv1a(&mut checksum, &v.to_bits().to_le_bytes());
    }
    for v in voxel.data() {
        fnv1a(&mut checksum, &v.to_bits().to_le_bytes());
    }

    let mut out = Vec::with_capacity(reps);
    for _ in 0..reps {
        let splat_s = time_per_call(|| {
            std::hint::black_box(softmax_splat(&payload, &flow, &conf).expect("validated inputs"));
        });
        let voxel_s = time_per_call(|| {
            std::hint::black_box(
                voxelize(&stream, (0, span), DEFAULT_BINS, (height, width)).expect("validated inputs"),
            );
        });
        out.push(PerfRep { pixels_per_s: n as f64 / splat_s, events_per_s: count as f64 / voxel_s });
    }
    Ok(PerfReport { height, width, channels, events: count, reps: out, checksum })
}
