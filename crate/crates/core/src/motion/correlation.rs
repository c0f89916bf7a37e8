use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::event::VoxelGrid;
use crate::exec::Exec;

/// Local correlation volume: for every source pixel, the normalized
/// correlation against each target offset in `[-r, r]^2`.
#[derive(Clone, Debug)]
pub struct CorrelationVolume {
    scores: Vec<f64>,
    height: usize,
    width: usize,
    radius: usize,
    /// Squared patch norm of each source pixel.
    pub source_energy: Vec<f64>,
    /// Squared patch norm of each target pixel.
    pub target_energy: Vec<f64>,
}

impl CorrelationVolume {
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Score for offset `(dx, dy)` at source `(x, y)`. Out-of-frame targets
    /// carry `f64::NEG_INFINITY`.
    pub fn score(&self, x: usize, y: usize, dx: i32, dy: i32) -> f64 {
        let side = 2 * self.radius + 1;
        let r = self.radius as i32;
        let oy = (dy + r) as usize;
        let ox = (dx + r) as usize;
        self.scores[((y * self.width + x) * side + oy) * side + ox]
    }

    /// Best offset at `(x, y)`. Ties go to the smallest displacement
    /// magnitude, then to the smallest `(dy, dx)` in row-major order.
    pub fn argmax(&self, x: usize, y: usize) -> (i32, i32) {
        let r = self.radius as i32;
        let mut best = (f64::NEG_INFINITY, i32::MAX, 0, 0);
        for dy in -r..=r {
            for dx in -r..=r {
                let s = self.score(x, y, dx, dy);
                if better(s, dx, dy, best) {
                    best = (s, dx * dx + dy * dy, dy, dx);
                }
            }
        }
        (best.3, best.2)
    }
}

/// Returns true when candidate `(s, dx, dy)` beats `best = (score, |d|^2, dy, dx)`.
#[inline]
pub(crate) fn better(s: f64, dx: i32, dy: i32, best: (f64, i32, i32, i32)) -> bool {
    if s > best.0 {
        return true;
    }
    if s < best.0 || s == f64::NEG_INFINITY {
        return false;
    }
    let m = dx * dx + dy * dy;
    (m, dy, dx) < (best.1, best.2, best.3)
}

/// Shared patch-correlation machinery for the volume and the iterative
/// estimator.
pub(crate) struct PatchMatcher {
    a: Vec<f64>,
    b: Vec<f64>,
    pub bins: usize,
    pub height: usize,
    pub width: usize,
    half: i32,
    pub energy_a: Vec<f64>,
    pub energy_b: Vec<f64>,
}

impl PatchMatcher {
    pub fn new(a: &VoxelGrid, b: &VoxelGrid, patch: usize) -> Result<Self> {
        if a.bins() != b.bins() || a.height() != b.height() || a.width() != b.width() {
            return Err(Error::invalid(format!(
                "voxel shapes differ: {}x{}x{} vs {}x{}x{}",
                a.bins(),
                a.height(),
                a.width(),
                b.bins(),
                b.height(),
                b.width()
            )));
        }
        if patch == 0 || patch.is_multiple_of(2) {
            return Err(Error::invalid(format!("patch size must be odd and >= 1, got {patch}")));
        }
        let to64 = |g: &VoxelGrid| g.data().iter().map(|&v| v as f64).collect::<Vec<_>>();
        let mut m = PatchMatcher {
            a: to64(a),
            b: to64(b),
            bins: a.bins(),
            height: a.height(),
            width: a.width(),
            half: (patch / 2) as i32,
            energy_a: Vec::new(),
            energy_b: Vec::new(),
        };
        m.energy_a = m.patch_energy(&m.a);
        m.energy_b = m.patch_energy(&m.b);
        Ok(m)
    }

    fn patch_energy(&self, data: &[f64]) -> Vec<f64> {
        let (h, w) = (self.height as i32, self.width as i32);
        let plane = self.height * self.width;
        let mut sq = vec![0.0f64; plane];
        for b in 0..self.bins {
            for (s, v) in sq.iter_mut().zip(&data[b * plane..(b + 1) * plane]) {
                *s += v * v;
            }
        }
        let mut out = vec![0.0f64; plane];
        for y in 0..h {
            for x in 0..w {
                let mut e = 0.0;
                for py in (y - self.half).max(0)..=(y + self.half).min(h - 1) {
                    for px in (x - self.half).max(0)..=(x + self.half).min(w - 1) {
                        e += sq[(py * w + px) as usize];
                    }
                }
                out[(y * w + x) as usize] = e;
            }
        }
        out
    }

    /// Normalized correlation of the source patch at `(x, y)` against the
    /// target patch at `(x + ox, y + oy)`. Zero-energy patches score 0;
    /// off-frame targets score negative infinity.
    pub fn score(&self, x: i32, y: i32, ox: i32, oy: i32) -> f64 {
        let (h, w) = (self.height as i32, self.width as i32);
        let (tx, ty) = (x + ox, y + oy);
        if tx < 0 || ty < 0 || tx >= w || ty >= h {
            return f64::NEG_INFINITY;
        }
        let ea = self.energy_a[(y * w + x) as usize];
        let eb = self.energy_b[(ty * w + tx) as usize];
        if ea == 0.0 || eb == 0.0 {
            return 0.0;
        }
        let plane = self.height * self.width;
        let mut dot = 0.0;
        for py in -self.half..=self.half {
            let (sy, qy) = (y + py, ty + py);
            if sy < 0 || sy >= h || qy < 0 || qy >= h {
                continue;
            }
            for px in -self.half..=self.half {
                let (sx, qx) = (x + px, tx + px);
                if sx < 0 || sx >= w || qx < 0 || qx >= w {
                    continue;
                }
                let si = (sy * w + sx) as usize;
                let ti = (qy * w + qx) as usize;
                for b in 0..self.bins {
                    dot += self.a[b * plane + si] * self.b[b * plane + ti];
                }
            }
        }
        dot / (ea * eb).sqrt()
    }
}

/// Builds the `(2r+1)^2` local correlation volume between two voxel grids
/// using `patch x patch` windows stacked over all bins.
pub fn build_correlation(
    voxel_a: &VoxelGrid,
    voxel_b: &VoxelGrid,
    radius: usize,
    patch: usize,
) -> Result<CorrelationVolume> {
    build_correlation_with(Exec::global(), voxel_a, voxel_b, radius, patch)
}

pub fn build_correlation_with(
    exec: Exec,
    voxel_a: &VoxelGrid,
    voxel_b: &VoxelGrid,
    radius: usize,
    patch: usize,
) -> Result<CorrelationVolume> {
    if radius == 0 {
        return Err(Error::invalid("correlation radius must be >= 1"));
    }
    let m = PatchMatcher::new(voxel_a, voxel_b, patch)?;
    let (h, w) = (m.height, m.width);
    let side = 2 * radius + 1;
    let r = radius as i32;
    let per_pixel = |i: usize, out: &mut [f64]| {
        let (x, y) = ((i % w) as i32, (i / w) as i32);
        for dy in -r..=r {
            for dx in -r..=r {
                out[((dy + r) as usize) * side + (dx + r) as usize] = m.score(x, y, dx, dy);
            }
        }
    };
    let mut scores = vec![0.0f64; h * w * side * side];
    if exec.is_parallel() {
        exec.install(|| scores.par_chunks_mut(side * side).enumerate().for_each(|(i, out)| per_pixel(i, out)));
    } else {
        scores.chunks_mut(side * side).enumerate().for_each(|(i, out)| per_pixel(i, out));
    }
    Ok(CorrelationVolume { scores, height: h, width: w, radius, source_energy: m.energy_a, target_energy: m.energy_b })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(h: usize, w: usize, seed: u32) -> VoxelGrid {
        let mut data = vec![0.0f32; 2 * h * w];
        let mut s = seed;
        for v in data.iter_mut() {
            s = s.wrapping_mul(1_103_515_245).wrapping_add(12_345);
            *v = ((s >> 16) % 7) as f32 - 3.0;
        }
        VoxelGrid::from_data(data, 2, h, w, (0, 1)).unwrap()
    }

    #[test]
    fn self_correlation_peaks_at_zero() {
        let a = textured(10, 12, 3);
        let vol = build_correlation(&a, &a, 2, 3).unwrap();
        for y in 0..10 {
            for x in 0..12 {
                if vol.source_energy[y * 12 + x] > 0.0 {
                    assert_eq!(vol.argmax(x, y), (0, 0), "at ({x}, {y})");
                }
            }
        }
    }

    #[test]
    fn zero_patches_score_zero_and_off_frame_is_sentinel() {
        let z = VoxelGrid::zeros(2, 5, 5, (0, 1));
        let vol = build_correlation(&z, &z, 1, 3).unwrap();
        assert_eq!(vol.score(2, 2, 1, -1), 0.0);
        assert_eq!(vol.score(0, 0, -1, 0), f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_shape_mismatch() {
        let a = VoxelGrid::zeros(2, 5, 5, (0, 1));
        let b = VoxelGrid::zeros(3, 5, 5, (0, 1));
        assert!(build_correlation(&a, &b, 1, 3).is_err());
        assert!(build_correlation(&a, &a, 1, 2).is_err());
        assert!(build_correlation(&a, &a, 0, 3).is_err());
    }

    #[test]
    fn parallel_matches_sequential() {
        let a = textured(9, 11, 1);
        let b = textured(9, 11, 2);
        let s = build_correlation_with(Exec::Sequential, &a, &b, 2, 3).unwrap();
        let p = build_correlation_with(Exec::Parallel(4), &a, &b, 2, 3).unwrap();
        assert_eq!(s.scores, p.scores);
    }
}
