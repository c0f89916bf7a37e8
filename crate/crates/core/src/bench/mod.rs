//! Metrics, benchmark scenarios and throughput measurement.

mod metrics;
mod noise;
mod perf;
mod report;
mod run;
mod scenes;

pub use metrics::{miou, ConfusionMatrix, MiouResult};
pub use noise::perturb_flow;
pub use perf::{perf_splat, PerfRep, PerfReport};
pub use report::{BenchReport, BenchRow};
pub use run::{
    ablation_run, anytime_curve, AblationKind, Method, ABLATION_OFFSETS_US, ANYTIME_KEYFRAMES_US, ANYTIME_OFFSETS_US,
    BENCH_INTERVAL_US, CONFIDENCE_NOISE_PX, DOMAIN_NOISE_PX, MEMORY_GAPS_US, MEMORY_KEYFRAMES,
};
pub use scenes::{builtin_scene, BUILTIN_SCENES};
