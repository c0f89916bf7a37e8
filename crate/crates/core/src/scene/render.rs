use crate::error::{Error, Result};
use crate::motion::FlowField;
use crate::scene::{SceneConfig, Shape};

/// Grayscale frame, values in `(0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityFrame {
    pub values: Vec<f64>,
    pub height: usize,
    pub width: usize,
    pub timestamp: u64,
}

impl IntensityFrame {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Hard per-pixel class ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    pub labels: Vec<u32>,
    pub height: usize,
    pub width: usize,
    pub timestamp: u64,
    pub num_classes: usize,
}

impl LabelMap {
    pub fn new(labels: Vec<u32>, height: usize, width: usize, timestamp: u64, num_classes: usize) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::invalid(format!("label map has {} entries, expected {height}x{width}", labels.len())));
        }
        if let Some(bad) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(Error::invalid(format!("label {bad} outside [0, {num_classes})")));
        }
        Ok(LabelMap { labels, height, width, timestamp, num_classes })
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

/// Index of the front-most object covering each pixel center, if any.
/// Higher `z_order` wins; equal `z_order` goes to the later object.
pub(crate) fn owners(config: &SceneConfig, t: u64) -> Vec<Option<usize>> {
    let (h, w) = config.dims();
    let mut owner: Vec<Option<usize>> = vec![None; h * w];
    let mut order: Vec<usize> = (0..config.objects.len()).collect();
    order.sort_by_key(|&i| config.objects[i].z_order);
    for i in order {
        let obj = &config.objects[i];
        let (px, py) = obj.position_at(t);
        match obj.shape {
            Shape::Rect { width, height } => {
                // Centers c with p <= c < p + size.
                let (x0, x1) = center_range(px, px + width, w);
                let (y0, y1) = center_range(py, py + height, h);
                for y in y0..y1 {
                    for slot in &mut owner[y * w + x0..y * w + x1] {
                        *slot = Some(i);
                    }
                }
            }
            Shape::Disk { radius } => {
                let r2 = radius * radius;
                let (x0, x1) = center_range(px - radius, px + radius + 1.0, w);
                let (y0, y1) = center_range(py - radius, py + radius + 1.0, h);
                for y in y0..y1 {
                    let dy = y as f64 - py;
                    for x in x0..x1 {
                        let dx = x as f64 - px;
                        if dx * dx + dy * dy <= r2 {
                            owner[y * w + x] = Some(i);
                        }
                    }
                }
            }
        }
    }
    owner
}

/// Integer centers `c` with `lo <= c < hi`, clipped to `[0, n)`.
fn center_range(lo: f64, hi: f64, n: usize) -> (usize, usize) {
    let a = lo.ceil().max(0.0);
    let b = hi.ceil().max(0.0);
    let a = if a > n as f64 { n } else { a as usize };
    let b = if b > n as f64 { n } else { b as usize };
    (a, b.max(a))
}

/// Renders intensity and labels at `t` (microseconds).
pub fn render_scene(config: &SceneConfig, t: u64) -> Result<(IntensityFrame, LabelMap)> {
    config.validate()?;
    let (h, w) = config.dims();
    let owner = owners(config, t);
    let mut values = vec![config.background; h * w];
    let mut labels = vec![0u32; h * w];
    for (i, o) in owner.iter().enumerate() {
        if let Some(k) = *o {
            values[i] = config.objects[k].intensity;
            labels[i] = config.objects[k].class_id;
        }
    }
    Ok((
        IntensityFrame { values, height: h, width: w, timestamp: t },
        LabelMap { labels, height: h, width: w, timestamp: t, num_classes: config.num_classes },
    ))
}

/// Exact displacement field from `t_a` to `t_b`: each pixel takes the motion
/// of the object owning it at `t_a`; background pixels stay put.
pub fn oracle_flow(config: &SceneConfig, t_a: u64, t_b: u64) -> Result<FlowField> {
    if t_b < t_a {
        return Err(Error::invalid(format!("oracle flow needs t_a <= t_b, got {t_a} > {t_b}")));
    }
    config.validate()?;
    let (h, w) = config.dims();
    let mut flow = FlowField::zeros(h, w);
    let owner = owners(config, t_a);
    let disp: Vec<(f64, f64)> = config.objects.iter().map(|o| o.displacement(t_a, t_b)).collect();
    for (i, o) in owner.iter().enumerate() {
        if let Some(k) = *o {
            flow.u[i] = disp[k].0;
            flow.v[i] = disp[k].1;
        }
    }
    Ok(flow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::SceneObject;

    fn rect(class_id: u32, pos: (f64, f64), vel: (f64, f64), size: f64, z: i32) -> SceneObject {
        SceneObject {
            shape: Shape::Rect { width: size, height: size },
            class_id,
            intensity: 0.8,
            position: pos,
            velocity: vel,
            z_order: z,
        }
    }

    #[test]
    fn moving_rect_occupies_expected_columns() {
        let cfg = SceneConfig::new(32, 32, 0.2).with_object(rect(1, (10.0, 10.0), (20.0, 0.0), 4.0, 0));
        let (_, labels) = render_scene(&cfg, 100_000).unwrap();
        let cols: Vec<usize> = (0..32).filter(|&x| labels.get(x, 11) == 1).collect();
        assert_eq!(cols, vec![12, 13, 14, 15]);
        let rows: Vec<usize> = (0..32).filter(|&y| labels.get(13, y) == 1).collect();
        assert_eq!(rows, vec![10, 11, 12, 13]);
    }

    #[test]
    fn static_scene_is_time_invariant() {
        let cfg = SceneConfig::new(16, 16, 0.5).with_object(rect(2, (3.3, 4.7), (0.0, 0.0), 5.0, 0));
        assert_eq!(render_scene(&cfg, 0).unwrap(), {
            let (mut f, mut l) = render_scene(&cfg, 987_654).unwrap();
            f.timestamp = 0;
            l.timestamp = 0;
            (f, l)
        });
    }

    #[test]
    fn higher_z_wins() {
        let cfg = SceneConfig::new(16, 16, 0.5).with_object(rect(1, (2.0, 2.0), (0.0, 0.0), 6.0, 5)).with_object(rect(
            2,
            (4.0, 4.0),
            (0.0, 0.0),
            6.0,
            1,
        ));
        let (_, l) = render_scene(&cfg, 0).unwrap();
        assert_eq!(l.get(5, 5), 1);
        assert_eq!(l.get(9, 9), 2);
    }

    #[test]
    fn oracle_flow_is_velocity_times_dt() {
        let cfg = SceneConfig::new(32, 32, 0.5).with_object(rect(1, (4.0, 4.0), (20.0, -10.0), 6.0, 0));
        let f = oracle_flow(&cfg, 0, 50_000).unwrap();
        assert_eq!(f.get(5, 5), (1.0, -0.5));
        assert_eq!(f.get(20, 20), (0.0, 0.0));
        let z = oracle_flow(&cfg, 7, 7).unwrap();
        assert!(z.u.iter().chain(&z.v).all(|&v| v == 0.0));
        assert!(oracle_flow(&cfg, 10, 5).is_err());
    }

    #[test]
    fn bad_class_rejected() {
        let cfg = SceneConfig::new(8, 8, 0.5).with_object(rect(11, (0.0, 0.0), (0.0, 0.0), 2.0, 0));
        assert!(render_scene(&cfg, 0).is_err());
    }
}
