use crate::error::{Error, Result};
use crate::event::VoxelGrid;
use crate::motion::{ConfidenceMap, FlowField};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfidenceParams {
    /// Half-width of the box used for local event density.
    pub density_radius: usize,
    pub alpha: f64,
    pub beta: f64,
    pub s_min: f64,
    pub s_max: f64,
    /// Total variation (px) at which flow consistency bottoms out.
    pub tv_scale: f64,
    /// Flow magnitude (px) at which events and flow count as agreeing.
    /// Zero disables the agreement factor.
    pub motion_ref: f64,
}

impl Default for ConfidenceParams {
    fn default() -> Self {
        ConfidenceParams {
            density_radius: 3,
            alpha: 4.0,
            beta: 2.0,
            s_min: -6.0,
            s_max: 6.0,
            tv_scale: 1.0,
            motion_ref: 1.0,
        }
    }
}

impl ConfidenceParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.alpha, self.beta, self.s_min, self.s_max, self.tv_scale, self.motion_ref]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.s_min > self.s_max || self.tv_scale <= 0.0 || self.motion_ref < 0.0 {
            return Err(Error::invalid(format!("invalid confidence parameters {self:?}")));
        }
        Ok(())
    }
}

/// Log-precision map from event/flow consensus.
///
/// `s = clamp(alpha * density + beta * consistency, s_min, s_max)`. Density is
/// the local event energy around the pixel or around its flow landing site,
/// whichever is larger, scaled by the frame maximum. Consistency rewards
/// locally smooth flow and flow whose magnitude agrees with the presence of
/// events. Pixels with no events near either end of their motion get `s_min`.
pub fn consensus_confidence(voxel: &VoxelGrid, flow: &FlowField, params: &ConfidenceParams) -> Result<ConfidenceMap> {
    params.validate()?;
    let (h, w) = flow.dims();
    if (voxel.height(), voxel.width()) != (h, w) {
        return Err(Error::invalid(format!("voxel is {}x{} but flow is {h}x{w}", voxel.height(), voxel.width())));
    }
    let local = box_mean(&voxel.energy(), h, w, params.density_radius);
    let peak = local.iter().cloned().fold(0.0, f64::max);
    let mut s = vec![params.s_min; h * w];
    if peak == 0.0 {
        return ConfidenceMap::new(s, h, w);
    }
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let tx = (x as f64 + flow.u[i]).round();
            let ty = (y as f64 + flow.v[i]).round();
            let landing = if tx >= 0.0 && ty >= 0.0 && tx < w as f64 && ty < h as f64 {
                local[ty as usize * w + tx as usize]
            } else {
                0.0
            };
            let energy = local[i].max(landing);
            if energy == 0.0 {
                continue;
            }
            let density = energy / peak;
            let smooth = 1.0 - (quadrant_tv(flow, x, y) / params.tv_scale).min(1.0);
            let agreement =
                if params.motion_ref > 0.0 { (flow.u[i].hypot(flow.v[i]) / params.motion_ref).min(1.0) } else { 1.0 };
            let raw = params.alpha * density + params.beta * smooth * agreement;
            s[i] = raw.clamp(params.s_min, params.s_max);
        }
    }
    ConfidenceMap::new(s, h, w)
}

/// Mean over the in-bounds part of a (2r+1)^2 window, via a summed-area table.
fn box_mean(values: &[f64], h: usize, w: usize, r: usize) -> Vec<f64> {
    let mut sat = vec![0.0f64; (h + 1) * (w + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += values[y * w + x];
            sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(h));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(w));
            let total =
                sat[y1 * (w + 1) + x1] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0] + sat[y0 * (w + 1) + x0];
            // The table can leave tiny negative residue on all-zero windows.
            let area = ((y1 - y0) * (x1 - x0)) as f64;
            out[y * w + x] = if total <= 0.0 { 0.0 } else { total / area };
        }
    }
    out
}

/// Smallest mean |du| + |dv| against the three neighbors of any in-bounds
/// quadrant, so a pixel on a motion boundary is judged by its own side.
fn quadrant_tv(flow: &FlowField, x: usize, y: usize) -> f64 {
    let (h, w) = (flow.height as i64, flow.width as i64);
    let (cu, cv) = flow.get(x, y);
    let mut best = f64::INFINITY;
    for (sx, sy) in [(-1i64, -1i64), (1, -1), (-1, 1), (1, 1)] {
        let (nx, ny) = (x as i64 + sx, y as i64 + sy);
        if nx < 0 || ny < 0 || nx >= w || ny >= h {
            continue;
        }
        let mut tv = 0.0;
        for (px, py) in [(nx, y as i64), (x as i64, ny), (nx, ny)] {
            let (u, v) = flow.get(px as usize, py as usize);
            tv += (u - cu).abs() + (v - cv).abs();
        }
        best = best.min(tv / 3.0);
    }
    if best.is_finite() {
        best
    } else {
        0.0
    }
}
