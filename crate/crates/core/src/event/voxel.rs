use crate::error::{Error, Result};
use crate::event::EventStream;

pub const DEFAULT_BINS: usize = 4;

/// `bins x height x width` polarity accumulation over a time window.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    data: Vec<f32>,
    bins: usize,
    height: usize,
    width: usize,
    window: (u64, u64),
}

impl VoxelGrid {
    pub fn zeros(bins: usize, height: usize, width: usize, window: (u64, u64)) -> Self {
        VoxelGrid { data: vec![0.0; bins * height * width], bins, height, width, window }
    }

    /// Builds a grid from raw `[bin][y][x]` data. Used for synthetic inputs.
    pub fn from_data(data: Vec<f32>, bins: usize, height: usize, width: usize, window: (u64, u64)) -> Result<Self> {
        if data.len() != bins * height * width {
            return Err(Error::invalid(format!(
                "voxel data has {} values, expected {bins}x{height}x{width}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("voxel data must be finite"));
        }
        Ok(VoxelGrid { data, bins, height, width, window })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn window(&self) -> (u64, u64) {
        self.window
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, b: usize, y: usize, x: usize) -> f32 {
        self.data[(b * self.height + y) * self.width + x]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    /// Per-pixel `sum_b |E(u, b)|`, row-major `height x width`.
    pub fn energy(&self) -> Vec<f64> {
        let plane = self.height * self.width;
        let mut out = vec![0.0f64; plane];
        for b in 0..self.bins {
            for (o, &v) in out.iter_mut().zip(&self.data[b * plane..(b + 1) * plane]) {
                *o += (v as f64).abs();
            }
        }
        out
    }

    /// `VOX1`, LE `u16 B`, `u16 H`, `u16 W`, `u64 t0`, `u64 t1`, then f32
    /// values in `[bin][y][x]` order.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(26 + 4 * self.data.len());
        out.extend_from_slice(b"VOX1");
        for d in [self.bins, self.height, self.width] {
            let d = u16::try_from(d).map_err(|_| Error::invalid(format!("dimension {d} exceeds u16")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.extend_from_slice(&self.window.0.to_le_bytes());
        out.extend_from_slice(&self.window.1.to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 26 || &bytes[0..4] != b"VOX1" {
            return Err(Error::Format("missing VOX1 header".into()));
        }
        let dim = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]) as usize;
        let word = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let (b, h, w) = (dim(4), dim(6), dim(8));
        let window = (word(10), word(18));
        let body = &bytes[26..];
        if body.len() != 4 * b * h * w {
            return Err(Error::parse_offset(
                26,
                format!("expected {} data bytes, found {}", 4 * b * h * w, body.len()),
            ));
        }
        let data = body.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        VoxelGrid::from_data(data, b, h, w, window)
    }
}

/// Accumulates event polarities into `bins` temporal bins with the triangular
/// kernel `max(0, 1 - |t* - b|)`, `t* = (B-1)(t - t0)/(t1 - t0)`.
///
/// Events outside the closed window `[t0, t1]` contribute nothing. Sums are
/// carried in `f64` in event order and rounded to `f32` once at the end.
pub fn voxelize(stream: &EventStream, window: (u64, u64), bins: usize, dims: (usize, usize)) -> Result<VoxelGrid> {
    let acc = accumulate(stream, window, bins, dims)?;
    Ok(VoxelGrid { data: acc.into_iter().map(|v| v as f32).collect(), bins, height: dims.0, width: dims.1, window })
}

/// The `f64` accumulator behind [`voxelize`], before rounding to `f32`.
pub fn accumulate(stream: &EventStream, window: (u64, u64), bins: usize, dims: (usize, usize)) -> Result<Vec<f64>> {
    let (t0, t1) = window;
    if t1 <= t0 {
        return Err(Error::invalid(format!("empty voxel window [{t0}, {t1}]")));
    }
    if bins < 2 {
        return Err(Error::invalid(format!("need at least 2 bins, got {bins}")));
    }
    if stream.dims() != dims {
        return Err(Error::invalid(format!("stream dims {:?} do not match requested {:?}", stream.dims(), dims)));
    }
    let (height, width) = dims;
    let plane = height * width;
    let mut acc = vec![0.0f64; bins * plane];

    let events = stream.events();
    let lo = events.partition_point(|e| e.t < t0);
    let hi = events.partition_point(|e| e.t <= t1);
    let span = (t1 - t0) as f64;
    let scale = (bins - 1) as f64;
    for e in &events[lo..hi] {
        let tn = scale * (e.t - t0) as f64 / span;
        let pix = e.y as usize * width + e.x as usize;
        let p = e.p as f64;
        let b0 = (tn.floor() as usize).min(bins - 1);
        for b in b0..(b0 + 2).min(bins) {
            let w = kernel(tn, b);
            if w > 0.0 {
                acc[b * plane + pix] += p * w;
            }
        }
    }
    Ok(acc)
}

#[inline]
fn kernel(tn: f64, b: usize) -> f64 {
    (1.0 - (tn - b as f64).abs()).max(0.0)
}
