use crate::error::{Error, Result};
use crate::event::{Event, EventStream};
use crate::scene::render::render_scene;
use crate::scene::SceneConfig;

pub const DEFAULT_CONTRAST: f64 = 0.3;
pub const DEFAULT_DT_SIM_US: u64 = 1000;

/// Contrast-threshold sensor model stepped at a fixed interval.
///
/// Each pixel keeps a reference log-intensity. At every step, while the
/// current log-intensity differs from the reference by at least `contrast`,
/// one event is emitted and the reference moves by `contrast` toward it.
/// The reference is stored as `base + n * contrast` so repeated crossings do
/// not accumulate rounding drift.
#[derive(Clone, Copy, Debug)]
pub struct EventSimulator {
    pub contrast: f64,
    pub dt_sim: u64,
}

impl Default for EventSimulator {
    fn default() -> Self {
        EventSimulator { contrast: DEFAULT_CONTRAST, dt_sim: DEFAULT_DT_SIM_US }
    }
}

impl EventSimulator {
    pub fn new(contrast: f64, dt_sim: u64) -> Result<Self> {
        if !(contrast > 0.0 && contrast.is_finite()) {
            return Err(Error::invalid(format!("contrast threshold must be positive, got {contrast}")));
        }
        if dt_sim == 0 {
            return Err(Error::invalid("simulation step must be at least 1 us"));
        }
        Ok(EventSimulator { contrast, dt_sim })
    }

    /// Runs the sensor over `[t0, t1]`. `log_intensity(t, out)` fills a
    /// row-major `height x width` buffer with `ln I` at time `t`. Steps fall
    /// at `t0 + k * dt_sim` plus a final step at `t1`; events carry the step
    /// time and are ordered by (time, y, x, emission index).
    pub fn run<F>(&self, height: usize, width: usize, t0: u64, t1: u64, mut log_intensity: F) -> Result<EventStream>
    where
        F: FnMut(u64, &mut [f64]),
    {
        if t1 <= t0 {
            return Err(Error::invalid(format!("simulation window [{t0}, {t1}] is empty")));
        }
        let c = self.contrast;
        let n = height * width;
        let mut current = vec![0.0f64; n];
        log_intensity(t0, &mut current);
        let base = current.clone();
        let mut level = vec![0i64; n];
        let mut events = Vec::new();

        let mut t = t0;
        while t < t1 {
            t = (t + self.dt_sim).min(t1);
            log_intensity(t, &mut current);
            for (i, &l) in current.iter().enumerate() {
                let (x, y) = ((i % width) as u16, (i / width) as u16);
                loop {
                    let reference = base[i] + level[i] as f64 * c;
                    let diff = l - reference;
                    let p = if diff >= c {
                        1
                    } else if -diff >= c {
                        -1
                    } else {
                        break;
                    };
                    level[i] += p as i64;
                    events.push(Event { x, y, t, p });
                }
            }
        }
        EventStream::new(events, height, width)?.with_span(t0, t1 + 1)
    }

    /// Final reference log-intensity per pixel after a run, recomputed from
    /// the event stream. Handy for checking the reconstruction bound.
    pub fn reference_after(&self, initial: &[f64], stream: &EventStream) -> Vec<f64> {
        let (_, w) = stream.dims();
        let mut level = vec![0i64; initial.len()];
        for e in stream.events() {
            level[e.y as usize * w + e.x as usize] += e.p as i64;
        }
        initial.iter().zip(&level).map(|(&b, &n)| b + n as f64 * self.contrast).collect()
    }
}

/// Simulates the events a translating-shape scene produces over `[t0, t1]`.
pub fn simulate_events(config: &SceneConfig, t0: u64, t1: u64, contrast: f64, dt_sim: u64) -> Result<EventStream> {
    config.validate()?;
    let sim = EventSimulator::new(contrast, dt_sim)?;
    let (h, w) = config.dims();
    sim.run(h, w, t0, t1, |t, out| {
        let (frame, _) = render_scene(config, t).expect("validated scene");
        for (o, v) in out.iter_mut().zip(&frame.values) {
            *o = v.ln();
        }
    })
}
