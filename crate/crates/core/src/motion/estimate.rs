use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::event::VoxelGrid;
use crate::exec::Exec;
use crate::motion::correlation::{better, PatchMatcher};
use crate::motion::FlowField;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowParams {
    /// Search radius per iteration (pixels).
    pub radius: usize,
    /// Odd patch side used for correlation.
    pub patch: usize,
    /// Number of refinement iterations.
    pub iters: usize,
    /// 3x3 box-smoothing passes over active pixels after each iteration.
    pub smooth_passes: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams { radius: 4, patch: 5, iters: 8, smooth_passes: 1 }
    }
}

impl FlowParams {
    /// Largest displacement the estimator can report on either axis.
    pub fn reach(&self) -> f64 {
        (self.radius * self.iters) as f64
    }
}

struct Track {
    x: i32,
    y: i32,
    m: (f64, f64),
    cache: HashMap<(i32, i32), f64>,
}

impl Track {
    fn integer_score(&mut self, matcher: &PatchMatcher, ox: i32, oy: i32) -> f64 {
        let (x, y) = (self.x, self.y);
        *self.cache.entry((ox, oy)).or_insert_with(|| matcher.score(x, y, ox, oy))
    }

    /// Correlation at a fractional offset, bilinear over the four integer
    /// neighbors. Any contributing off-frame neighbor makes the result
    /// negative infinity.
    fn lookup(&mut self, matcher: &PatchMatcher, ox: f64, oy: f64) -> f64 {
        let (fx, fy) = (ox.floor(), oy.floor());
        let (ax, ay) = (ox - fx, oy - fy);
        let (ix, iy) = (fx as i32, fy as i32);
        let mut acc = 0.0;
        for (cx, wx) in [(ix, 1.0 - ax), (ix + 1, ax)] {
            if wx == 0.0 {
                continue;
            }
            for (cy, wy) in [(iy, 1.0 - ay), (iy + 1, ay)] {
                if wy == 0.0 {
                    continue;
                }
                let s = self.integer_score(matcher, cx, cy);
                if s == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                acc += wx * wy * s;
            }
        }
        acc
    }

    fn step(&mut self, matcher: &PatchMatcher, radius: i32, reach: f64) {
        let (cu, cv) = self.m;
        let mut best = (f64::NEG_INFINITY, i32::MAX, 0, 0);
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                let (ou, ov) = (cu + dx as f64, cv + dy as f64);
                if ou.abs() > reach || ov.abs() > reach {
                    continue;
                }
                let s = self.lookup(matcher, ou, ov);
                if better(s, dx, dy, best) {
                    best = (s, dx * dx + dy * dy, dy, dx);
                }
            }
        }
        if best.0 > f64::NEG_INFINITY {
            self.m = (cu + best.3 as f64, cv + best.2 as f64);
        }
    }
}

/// Iterative correlation-lookup flow from `voxel_a` (source time) to
/// `voxel_b` (target time).
///
/// Starts from zero flow. Each iteration moves every event-active source
/// pixel to the best-scoring offset within `radius` of its current estimate,
/// then box-smooths the estimates over active pixels. Pixels without events
/// are filled afterwards from their nearest active neighbors.
pub fn estimate_flow(voxel_a: &VoxelGrid, voxel_b: &VoxelGrid, params: &FlowParams) -> Result<FlowField> {
    estimate_flow_with(Exec::global(), voxel_a, voxel_b, params)
}

pub fn estimate_flow_with(
    exec: Exec,
    voxel_a: &VoxelGrid,
    voxel_b: &VoxelGrid,
    params: &FlowParams,
) -> Result<FlowField> {
    if params.iters == 0 {
        return Err(Error::invalid("flow estimation needs at least one iteration"));
    }
    if params.radius == 0 {
        return Err(Error::invalid("correlation radius must be >= 1"));
    }
    let matcher = PatchMatcher::new(voxel_a, voxel_b, params.patch)?;
    let (h, w) = (matcher.height, matcher.width);
    let energy = voxel_a.energy();
    let active: Vec<usize> = (0..h * w).filter(|&i| energy[i] > 0.0).collect();
    if active.is_empty() {
        return Ok(FlowField::zeros(h, w));
    }
    let mut slot = vec![usize::MAX; h * w];
    for (k, &i) in active.iter().enumerate() {
        slot[i] = k;
    }
    let mut tracks: Vec<Track> = active
        .iter()
        .map(|&i| Track { x: (i % w) as i32, y: (i / w) as i32, m: (0.0, 0.0), cache: HashMap::new() })
        .collect();

    let radius = params.radius as i32;
    let reach = params.reach();
    for _ in 0..params.iters {
        if exec.is_parallel() {
            exec.install(|| tracks.par_iter_mut().for_each(|t| t.step(&matcher, radius, reach)));
        } else {
            tracks.iter_mut().for_each(|t| t.step(&matcher, radius, reach));
        }
        for _ in 0..params.smooth_passes {
            let prev: Vec<(f64, f64)> = tracks.iter().map(|t| t.m).collect();
            for (k, t) in tracks.iter_mut().enumerate() {
                let (mut su, mut sv, mut n) = (0.0, 0.0, 0usize);
                for ny in (t.y - 1).max(0)..=(t.y + 1).min(h as i32 - 1) {
                    for nx in (t.x - 1).max(0)..=(t.x + 1).min(w as i32 - 1) {
                        let s = slot[(ny as usize) * w + nx as usize];
                        if s != usize::MAX {
                            su += prev[s].0;
                            sv += prev[s].1;
                            n += 1;
                        }
                    }
                }
                debug_assert!(n >= 1 && slot[(t.y as usize) * w + t.x as usize] == k);
                t.m = (su / n as f64, sv / n as f64);
            }
        }
    }

    let mut flow = FlowField::zeros(h, w);
    let mut known = vec![false; h * w];
    for (t, &i) in tracks.iter().zip(&active) {
        flow.u[i] = t.m.0.clamp(-reach, reach);
        flow.v[i] = t.m.1.clamp(-reach, reach);
        known[i] = true;
    }
    fill_from_nearest(&mut flow, &mut known, &active);
    Ok(flow)
}

/// Breadth-first fill: each unknown pixel takes the mean of its already
/// known 4-neighbors from the previous ring.
fn fill_from_nearest(flow: &mut FlowField, known: &mut [bool], seeds: &[usize]) {
    let (h, w) = flow.dims();
    let mut frontier: Vec<usize> = seeds.to_vec();
    let mut queued = known.to_vec();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &i in &frontier {
            let (x, y) = (i % w, i / w);
            for j in neighbors4(x, y, h, w) {
                if !queued[j] {
                    queued[j] = true;
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        let values: Vec<(f64, f64)> = next
            .iter()
            .map(|&j| {
                let (x, y) = (j % w, j / w);
                let (mut su, mut sv, mut n) = (0.0, 0.0, 0usize);
                for k in neighbors4(x, y, h, w) {
                    if known[k] {
                        su += flow.u[k];
                        sv += flow.v[k];
                        n += 1;
                    }
                }
                (su / n as f64, sv / n as f64)
            })
            .collect();
        for (&j, (u, v)) in next.iter().zip(values) {
            flow.u[j] = u;
            flow.v[j] = v;
            known[j] = true;
        }
        frontier = next;
    }
}

fn neighbors4(x: usize, y: usize, h: usize, w: usize) -> impl Iterator<Item = usize> {
    let mut out = [usize::MAX; 4];
    if y > 0 {
        out[0] = (y - 1) * w + x;
    }
    if x > 0 {
        out[1] = y * w + x - 1;
    }
    if x + 1 < w {
        out[2] = y * w + x + 1;
    }
    if y + 1 < h {
        out[3] = (y + 1) * w + x;
    }
    out.into_iter().filter(|&i| i != usize::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob_voxel(h: usize, w: usize, shift: (i32, i32)) -> VoxelGrid {
        let mut data = vec![0.0f32; 2 * h * w];
        let pts = [(5, 5, 1.0), (6, 5, 2.0), (5, 7, -1.0), (8, 6, 1.5), (7, 8, 0.5)];
        for (b, plane) in data.chunks_mut(h * w).enumerate() {
            for &(x, y, v) in &pts {
                let (x, y) = (x + shift.0, y + shift.1);
                plane[y as usize * w + x as usize] = v * (b as f32 + 1.0);
            }
        }
        VoxelGrid::from_data(data, 2, h, w, (0, 1)).unwrap()
    }

    #[test]
    fn identical_voxels_give_zero_flow() {
        let a = blob_voxel(16, 16, (0, 0));
        let f = estimate_flow(&a, &a, &FlowParams::default()).unwrap();
        assert_eq!(f.max_abs(), 0.0);
    }

    #[test]
    fn empty_voxels_give_zero_flow() {
        let a = VoxelGrid::zeros(4, 8, 8, (0, 1));
        let f = estimate_flow(&a, &a, &FlowParams::default()).unwrap();
        assert_eq!(f, FlowField::zeros(8, 8));
    }

    #[test]
    fn recovers_small_rigid_shift() {
        let a = blob_voxel(20, 20, (0, 0));
        let b = blob_voxel(20, 20, (2, 0));
        let params = FlowParams { smooth_passes: 0, ..FlowParams::default() };
        let f = estimate_flow(&a, &b, &params).unwrap();
        for (x, y) in [(5, 5), (6, 5), (8, 6)] {
            let (u, v) = f.get(x, y);
            assert!((u - 2.0).abs() <= 0.5 && v.abs() <= 0.5, "({x},{y}) -> ({u},{v})");
        }
    }

    #[test]
    fn fill_spreads_to_every_pixel_and_respects_reach() {
        let a = blob_voxel(12, 12, (0, 0));
        let b = blob_voxel(12, 12, (1, 1));
        let params = FlowParams { radius: 1, iters: 2, ..FlowParams::default() };
        let f = estimate_flow(&a, &b, &params).unwrap();
        assert!(f.max_abs() <= params.reach());
        assert!(f.u.iter().all(|u| u.is_finite()));
    }

    #[test]
    fn rejects_zero_iterations() {
        let a = VoxelGrid::zeros(2, 4, 4, (0, 1));
        let params = FlowParams { iters: 0, ..FlowParams::default() };
        assert!(estimate_flow(&a, &a, &params).is_err());
    }
}
