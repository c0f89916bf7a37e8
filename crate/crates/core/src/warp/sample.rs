use crate::error::Result;
use crate::motion::FlowField;
use crate::warp::splat::check_dims;
use crate::warp::FeatureMap;

/// Bilinear backward warp: `out(q) = payload(q + flow(q))`, sampling
/// coordinates clamped to the frame border.
pub fn backward_warp(payload: &FeatureMap, flow: &FlowField) -> Result<FeatureMap> {
    check_dims(payload, flow)?;
    let (h, w) = payload.dims();
    let n = h * w;
    let mut out = payload.clone();
    if n == 0 {
        return Ok(out);
    }
    for y in 0..h {
        for x in 0..w {
            let q = y * w + x;
            let sx = (x as f64 + flow.u[q]).clamp(0.0, (w - 1) as f64);
            let sy = (y as f64 + flow.v[q]).clamp(0.0, (h - 1) as f64);
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (ax, ay) = (sx - x0 as f64, sy - y0 as f64);
            for c in 0..payload.channels {
                let v = |px: usize, py: usize| payload.data[c * n + py * w + px];
                let top = v(x0, y0) + ax * (v(x1, y0) - v(x0, y0));
                let bot = v(x0, y1) + ax * (v(x1, y1) - v(x0, y1));
                out.data[c * n + q] = top + ay * (bot - top);
            }
        }
    }
    Ok(out)
}
