use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_NUM_CLASSES: usize = 11;

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// Axis-aligned rectangle; `position` is its top-left corner.
    Rect { width: f64, height: f64 },
    /// Disk; `position` is its center.
    Disk { radius: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneObject {
    pub shape: Shape,
    pub class_id: u32,
    pub intensity: f64,
    /// Pixels at `t = 0`.
    pub position: (f64, f64),
    /// Pixels per second.
    pub velocity: (f64, f64),
    pub z_order: i32,
}

impl SceneObject {
    /// Position after `t_us` microseconds of constant-velocity motion.
    pub fn position_at(&self, t_us: u64) -> (f64, f64) {
        (self.position.0 + self.velocity.0 * t_us as f64 / 1e6, self.position.1 + self.velocity.1 * t_us as f64 / 1e6)
    }

    /// Displacement in pixels between two timestamps.
    pub fn displacement(&self, t_a: u64, t_b: u64) -> (f64, f64) {
        let dt = t_b as f64 - t_a as f64;
        (self.velocity.0 * dt / 1e6, self.velocity.1 * dt / 1e6)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneConfig {
    pub height: usize,
    pub width: usize,
    pub background: f64,
    pub objects: Vec<SceneObject>,
    pub num_classes: usize,
    pub seed: u64,
}

impl SceneConfig {
    pub fn new(height: usize, width: usize, background: f64) -> Self {
        SceneConfig { height, width, background, objects: Vec::new(), num_classes: DEFAULT_NUM_CLASSES, seed: 0 }
    }

    pub fn with_object(mut self, obj: SceneObject) -> Self {
        self.objects.push(obj);
        self
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::invalid("scene dims must be positive"));
        }
        if self.height > u16::MAX as usize || self.width > u16::MAX as usize {
            return Err(Error::invalid("scene dims exceed 65535"));
        }
        if self.num_classes < 2 {
            return Err(Error::invalid("need at least 2 classes"));
        }
        if !(self.background > 0.0 && self.background <= 1.0) {
            return Err(Error::invalid(format!("background intensity {} outside (0, 1]", self.background)));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if o.class_id == 0 || o.class_id as usize >= self.num_classes {
                return Err(Error::invalid(format!(
                    "object {i}: class {} outside [1, {})",
                    o.class_id, self.num_classes
                )));
            }
            if !(o.intensity > 0.0 && o.intensity <= 1.0) {
                return Err(Error::invalid(format!("object {i}: intensity {} outside (0, 1]", o.intensity)));
            }
            let finite = [o.position.0, o.position.1, o.velocity.0, o.velocity.1].iter().all(|v| v.is_finite());
            if !finite {
                return Err(Error::invalid(format!("object {i}: non-finite motion")));
            }
            match o.shape {
                Shape::Rect { width, height } if width > 0.0 && height > 0.0 => {}
                Shape::Disk { radius } if radius > 0.0 => {}
                _ => return Err(Error::invalid(format!("object {i}: degenerate shape"))),
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses the line-oriented `key = value` scene format. Objects start
    /// with an `[object]` header; `#` begins a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SceneConfig::new(0, 0, 1.0);
        let mut have_dims = false;
        let mut current: Option<(usize, PartialObject)> = None;

        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line == "[object]" {
                if let Some((at, obj)) = current.take() {
                    cfg.objects.push(obj.finish(at)?);
                }
                current = Some((lineno, PartialObject::default()));
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::parse_line(lineno, format!("expected key = value, got `{line}`")))?;
            match current.as_mut() {
                None => match key {
                    "dims" => {
                        let (h, w) = parse_pair::<usize>(value, 'x', lineno)?;
                        cfg.height = h;
                        cfg.width = w;
                        have_dims = true;
                    }
                    "background" => cfg.background = parse_num(value, lineno)?,
                    "seed" => cfg.seed = parse_num(value, lineno)?,
                    "num_classes" => cfg.num_classes = parse_num(value, lineno)?,
                    _ => return Err(Error::parse_line(lineno, format!("unknown scene key `{key}`"))),
                },
                Some((_, obj)) => match key {
                    "shape" => obj.shape = Some(parse_shape(value, lineno)?),
                    "class" => obj.class_id = Some(parse_num(value, lineno)?),
                    "intensity" => obj.intensity = Some(parse_num(value, lineno)?),
                    "pos" => obj.position = Some(parse_pair(value, ',', lineno)?),
                    "vel" => obj.velocity = Some(parse_pair(value, ',', lineno)?),
                    "z" => obj.z_order = Some(parse_num(value, lineno)?),
                    _ => return Err(Error::parse_line(lineno, format!("unknown object key `{key}`"))),
                },
            }
        }
        if let Some((at, obj)) = current.take() {
            cfg.objects.push(obj.finish(at)?);
        }
        if !have_dims {
            return Err(Error::parse_line(1, "missing `dims`"));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes back into the text format accepted by [`SceneConfig::parse`].
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dims = {}x{}", self.height, self.width);
        let _ = writeln!(s, "background = {}", self.background);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "num_classes = {}", self.num_classes);
        for o in &self.objects {
            let _ = writeln!(s, "\n[object]");
            match o.shape {
                Shape::Rect { width, height } => {
                    let _ = writeln!(s, "shape = rect {width}x{height}");
                }
                Shape::Disk { radius } => {
                    let _ = writeln!(s, "shape = disk {radius}");
                }
            }
            let _ = writeln!(s, "class = {}", o.class_id);
            let _ = writeln!(s, "intensity = {}", o.intensity);
            let _ = writeln!(s, "pos = {},{}", o.position.0, o.position.1);
            let _ = writeln!(s, "vel = {},{}", o.velocity.0, o.velocity.1);
            let _ = writeln!(s, "z = {}", o.z_order);
        }
        s
    }
}

#[derive(Default)]
struct PartialObject {
    shape: Option<Shape>,
    class_id: Option<u32>,
    intensity: Option<f64>,
    position: Option<(f64, f64)>,
    velocity: Option<(f64, f64)>,
    z_order: Option<i32>,
}

impl PartialObject {
    fn finish(self, line: usize) -> Result<SceneObject> {
        let missing = |k: &str| Error::parse_line(line, format!("object is missing `{k}`"));
        Ok(SceneObject {
            shape: self.shape.ok_or_else(|| missing("shape"))?,
            class_id: self.class_id.ok_or_else(|| missing("class"))?,
            intensity: self.intensity.ok_or_else(|| missing("intensity"))?,
            position: self.position.ok_or_else(|| missing("pos"))?,
            velocity: self.velocity.unwrap_or((0.0, 0.0)),
            z_order: self.z_order.unwrap_or(0),
        })
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.trim().parse().map_err(|_| Error::parse_line(line, format!("bad number `{s}`")))
}

fn parse_pair<T: std::str::FromStr>(s: &str, sep: char, line: usize) -> Result<(T, T)> {
    let (a, b) = s.split_once(sep).ok_or_else(|| Error::parse_line(line, format!("expected `a{sep}b`, got `{s}`")))?;
    Ok((parse_num(a, line)?, parse_num(b, line)?))
}

fn parse_shape(s: &str, line: usize) -> Result<Shape> {
    let mut parts = s.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some("rect"), Some(size), None) => {
            let (width, height) = parse_pair(size, 'x', line)?;
            Ok(Shape::Rect { width, height })
        }
        (Some("disk"), Some(r), None) => Ok(Shape::Disk { radius: parse_num(r, line)? }),
        _ => Err(Error::parse_line(line, format!("shape must be `rect WxH` or `disk R`, got `{s}`"))),
    }
}
