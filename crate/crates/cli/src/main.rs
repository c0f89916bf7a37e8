//! `anyprop`: simulate events, voxelize, propagate labels and run benchmarks.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use anyprop_core::bench::{
    ablation_run, anytime_curve, builtin_scene, miou, perf_splat, AblationKind, BenchReport, Method, ANYTIME_OFFSETS_US,
};
use anyprop_core::event::{read_events, voxelize, write_events, EventFormat};
use anyprop_core::pipeline::{ConfidenceSource, Pipeline, PipelineOptions};
use anyprop_core::scene::{render_scene, simulate_events, LabelMap, SceneConfig, DEFAULT_CONTRAST, DEFAULT_DT_SIM_US};

#[derive(Parser)]
#[command(name = "anyprop", version, about = "Event-driven anytime label propagation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene and write its simulated event stream.
    Simulate(SimulateArgs),
    /// Bin an event file into a VOX1 voxel grid.
    Voxelize(VoxelizeArgs),
    /// Propagate keyframe labels to an offset and write the label grid.
    Propagate(PropagateArgs),
    /// Run a benchmark and write its CSV report.
    Bench(BenchArgs),
    /// Throughput microbenchmarks.
    Perf {
        #[command(subcommand)]
        target: PerfTarget,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Scene file, or the name of a built-in scene.
    #[arg(long)]
    scene: String,
    /// Output path; `.csv` selects CSV, anything else EVS1.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    t0: u64,
    #[arg(long, default_value_t = 300_000)]
    t1: u64,
    #[arg(long, default_value_t = DEFAULT_CONTRAST)]
    contrast: f64,
    #[arg(long, default_value_t = DEFAULT_DT_SIM_US)]
    dt_sim: u64,
}

#[derive(Args)]
struct VoxelizeArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    t0: u64,
    #[arg(long)]
    t1: u64,
    #[arg(long, default_value_t = 4)]
    bins: usize,
    /// Sensor size `HxW`; needed for CSV input.
    #[arg(long, value_parser = parse_size)]
    dims: Option<(usize, usize)>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PropagateArgs {
    #[arg(long)]
    scene: String,
    /// Offset from the last keyframe in microseconds.
    #[arg(long)]
    dt_us: u64,
    /// Last keyframe time; earlier keyframes sit at multiples of the interval.
    #[arg(long, default_value_t = 200_000)]
    keyframe_us: u64,
    #[arg(long, default_value_t = 100_000)]
    interval_us: u64,
    /// Pipeline options file (`key = value`).
    #[arg(long)]
    options: Option<PathBuf>,
    #[arg(long)]
    no_memory: bool,
    #[arg(long)]
    no_confidence: bool,
    /// Use the scene's analytic flow instead of estimating it from events.
    #[arg(long)]
    flow_oracle: bool,
    /// Label grid as CSV, one row per image row.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    flow_out: Option<PathBuf>,
    #[arg(long)]
    confidence_out: Option<PathBuf>,
    #[arg(long)]
    feature_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchKind {
    Anytime,
    WarpDomain,
    MemoryGap,
    Confidence,
}

impl BenchKind {
    fn default_scene(self) -> &'static str {
        match self {
            BenchKind::Anytime | BenchKind::WarpDomain => "multi",
            BenchKind::MemoryGap => "occlusion",
            BenchKind::Confidence => "adversarial",
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    #[arg(value_enum)]
    kind: BenchKind,
    /// Scene file or built-in name; each kind has its own default.
    #[arg(long)]
    scene: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Comma-separated methods for `anytime`.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum PerfTarget {
    /// Softmax splatting and voxelization throughput.
    Splat {
        #[arg(long, value_parser = parse_size, default_value = "256x256")]
        size: (usize, usize),
        #[arg(long, default_value_t = 8)]
        channels: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s.split_once('x').ok_or_else(|| format!("expected HxW, got '{s}'"))?;
    let h = h.trim().parse().map_err(|_| format!("bad height in '{s}'"))?;
    let w = w.trim().parse().map_err(|_| format!("bad width in '{s}'"))?;
    Ok((h, w))
}

fn load_scene(arg: &str) -> Result<SceneConfig> {
    let path = Path::new(arg);
    if path.exists() {
        return SceneConfig::load(path).with_context(|| format!("loading scene {}", path.display()));
    }
    builtin_scene(arg).with_context(|| format!("'{arg}' is neither a scene file nor a built-in scene"))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn labels_csv(labels: &LabelMap) -> String {
    let mut s = String::new();
    for row in labels.labels.chunks(labels.width) {
        let cells: Vec<String> = row.iter().map(u32::to_string).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let scene = load_scene(&a.scene)?;
    let stream = simulate_events(&scene, a.t0, a.t1, a.contrast, a.dt_sim)?;
    write_events(&stream, &a.out, EventFormat::from_path(&a.out))?;
    println!("wrote {} events to {}", stream.len(), a.out.display());
    Ok(())
}

fn voxelize_cmd(a: VoxelizeArgs) -> Result<()> {
    let stream = read_events(&a.events, EventFormat::from_path(&a.events), a.dims)
        .with_context(|| format!("reading {}", a.events.display()))?;
    let grid = voxelize(&stream.slice(a.t0, a.t1), (a.t0, a.t1), a.bins, stream.dims())?;
    write(&a.out, grid.to_bytes()?)?;
    println!("voxel sum {:.6} over {} bins", grid.sum(), grid.bins());
    Ok(())
}

fn propagate_cmd(a: PropagateArgs) -> Result<()> {
    let scene = load_scene(&a.scene)?;
    if a.interval_us == 0 || a.keyframe_us < a.interval_us {
        bail!("the keyframe time must be at least one interval");
    }
    let mut opts = match &a.options {
        Some(p) => PipelineOptions::load(p).with_context(|| format!("loading options {}", p.display()))?,
        None => PipelineOptions::default(),
    };
    if a.no_memory {
        opts.memory = false;
    }
    if a.no_confidence {
        opts.confidence_source = ConfidenceSource::Constant(0.0);
    }
    if a.flow_oracle {
        opts = opts.with_flow_override(scene.clone());
    }
    let events = simulate_events(&scene, 0, a.keyframe_us + a.dt_us, DEFAULT_CONTRAST, DEFAULT_DT_SIM_US)?;
    let mut pipe = Pipeline::new(opts)?;
    let first = a.keyframe_us % a.interval_us;
    let first = if first == 0 { a.interval_us } else { first };
    for t in (first..=a.keyframe_us).step_by(a.interval_us as usize) {
        let (frame, labels) = render_scene(&scene, t)?;
        pipe.observe_keyframe(&frame, &labels, a.interval_us)?;
    }
    let pred = pipe.propagate(&events, a.dt_us)?;
    write(&a.out, labels_csv(&pred.labels))?;
    if let Some(p) = &a.flow_out {
        write(p, pred.flow.to_bytes()?)?;
    }
    if let Some(p) = &a.confidence_out {
        write(p, pred.confidence.to_bytes()?)?;
    }
    if let Some(p) = &a.feature_out {
        write(p, pred.feature.to_bytes()?)?;
    }
    let (_, gt) = render_scene(&scene, a.keyframe_us + a.dt_us)?;
    let score = miou(&pred.labels, &gt, scene.num_classes)?;
    println!("miou={:.6} hole_fraction={:.6}", score.miou, pred.hole_fraction());
    Ok(())
}

fn bench_cmd(a: BenchArgs) -> Result<()> {
    let scene = load_scene(a.scene.as_deref().unwrap_or(a.kind.default_scene()))?;
    let report: BenchReport = match a.kind {
        BenchKind::Anytime => {
            let methods = match &a.methods {
                Some(names) => names.iter().map(|n| n.parse::<Method>()).collect::<Result<Vec<_>, _>>()?,
                None => Method::ALL.to_vec(),
            };
            anytime_curve(&scene, &methods, &ANYTIME_OFFSETS_US, a.seed)?
        }
        BenchKind::WarpDomain => ablation_run(AblationKind::WarpDomain, &scene, a.seed)?,
        BenchKind::MemoryGap => ablation_run(AblationKind::MemoryGap, &scene, a.seed)?,
        BenchKind::Confidence => ablation_run(AblationKind::Confidence, &scene, a.seed)?,
    };
    write(&a.csv, report.to_csv())?;
    if let Some(p) = &a.svg {
        write(p, report.to_svg())?;
    }
    for m in report.methods() {
        println!("{m}: aggregate miou={:.6}", report.aggregate(m).miou());
    }
    eprintln!("runtime {:.1} ms", report.runtime_ms());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(a) => simulate(a),
        Command::Voxelize(a) => voxelize_cmd(a),
        Command::Propagate(a) => propagate_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Perf { target: PerfTarget::Splat { size, channels, reps, seed, out } } => {
            let report = perf_splat(size.0, size.1, channels, reps, seed)?;
            let text = report.to_text();
            print!("{text}");
            if let Some(p) = &out {
                write(p, &text)?;
            }
            Ok(())
        }
    }
}
