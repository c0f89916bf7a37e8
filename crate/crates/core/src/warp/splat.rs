use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::motion::{ConfidenceMap, FlowField};
use crate::warp::FeatureMap;

/// Denominator threshold separating covered pixels from holes.
pub const COVERAGE_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SplatResult {
    /// `C x H x W` weighted feature sums.
    pub numerator: Vec<f64>,
    /// `H x W` weight sums.
    pub denominator: Vec<f64>,
    /// Normalized features. Holes carry the unwarped source payload.
    pub output: FeatureMap,
    pub coverage: Vec<bool>,
}

impl SplatResult {
    pub fn hole_fraction(&self) -> f64 {
        if self.coverage.is_empty() {
            return 0.0;
        }
        self.coverage.iter().filter(|&&c| !c).count() as f64 / self.coverage.len() as f64
    }
}

/// Bilinear kernel weight of target coordinate `p` for landing position `f`.
#[inline]
pub fn kernel(f: f64, p: f64) -> f64 {
    (1.0 - (f - p).abs()).max(0.0)
}

/// One bilinear corner of a forward-mapped source pixel.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Corner {
    pub tx: i64,
    pub ty: i64,
    pub kx: f64,
    pub ky: f64,
    /// Right derivatives of `kx` and `ky` with respect to the landing position.
    pub dkx: f64,
    pub dky: f64,
}

/// The four floor-based corners around `(fx, fy)` in the fixed order
/// top-left, top-right, bottom-left, bottom-right.
#[inline]
pub(crate) fn corners(fx: f64, fy: f64) -> [Corner; 4] {
    let (x0, y0) = (fx.floor(), fy.floor());
    let c = |px: f64, py: f64, dkx: f64, dky: f64| Corner {
        tx: px as i64,
        ty: py as i64,
        kx: kernel(fx, px),
        ky: kernel(fy, py),
        dkx,
        dky,
    };
    [c(x0, y0, -1.0, -1.0), c(x0 + 1.0, y0, 1.0, -1.0), c(x0, y0 + 1.0, -1.0, 1.0), c(x0 + 1.0, y0 + 1.0, 1.0, 1.0)]
}

pub(crate) fn check_dims(payload: &FeatureMap, flow: &FlowField) -> Result<()> {
    if payload.dims() != flow.dims() {
        return Err(Error::invalid(format!(
            "payload is {}x{} but flow is {}x{}",
            payload.height, payload.width, flow.height, flow.width
        )));
    }
    Ok(())
}

/// Forward summation splat: every source pixel scatters `weight * payload`
/// (and `weight` alone into the denominator) bilinearly around its flow
/// target. Off-frame corners are dropped.
pub fn splat_sum(payload: &FeatureMap, flow: &FlowField, weight: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    splat_sum_with(Exec::global(), payload, flow, weight)
}

pub fn splat_sum_with(
    exec: Exec,
    payload: &FeatureMap,
    flow: &FlowField,
    weight: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dims(payload, flow)?;
    if weight.len() != payload.plane_len() {
        return Err(Error::invalid("weight map must match the payload plane"));
    }
    if let Some(w) = weight.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::invalid(format!("splat weights must be finite and >= 0, found {w}")));
    }
    Ok(if exec.is_parallel() {
        exec.install(|| scatter_rows(payload, flow, weight))
    } else {
        scatter_sequential(payload, flow, weight)
    })
}

/// Reference accumulation in row-major source order.
fn scatter_sequential(payload: &FeatureMap, flow: &FlowField, weight: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (h, w) = payload.dims();
    let n = h * w;
    let mut num = vec![0.0; payload.channels * n];
    let mut den = vec![0.0; n];
    for y in 0..h {
        for x in 0..w {
            let q = y * w + x;
            let e = weight[q];
            for k in corners(x as f64 + flow.u[q], y as f64 + flow.v[q]) {
                if k.tx < 0 || k.ty < 0 || k.tx >= w as i64 || k.ty >= h as i64 {
                    continue;
                }
                let kw = k.kx * k.ky;
                if kw == 0.0 {
                    continue;
                }
                let t = k.ty as usize * w + k.tx as usize;
                den[t] += e * kw;
                for c in 0..payload.channels {
                    num[c * n + t] += (e * payload.data[c * n + q]) * kw;
                }
            }
        }
    }
    (num, den)
}

/// Parallel accumulation that matches [`scatter_sequential`] bit for bit.
///
/// Contributions are staged per target row in source order, then each row is
/// summed independently, so every target sees the same addition sequence.
fn scatter_rows(payload: &FeatureMap, flow: &FlowField, weight: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (h, w) = payload.dims();
    let n = h * w;
    let chans = payload.channels;
    let staged = stage(flow);
    let rows: Vec<(Vec<f64>, Vec<f64>)> = staged
        .par_iter()
        .map(|list| {
            let mut den = vec![0.0; w];
            let mut num = vec![0.0; chans * w];
            for &(q, tx, kw) in list {
                let (q, tx) = (q as usize, tx as usize);
                let e = weight[q];
                den[tx] += e * kw;
                for c in 0..chans {
                    num[c * w + tx] += (e * payload.data[c * n + q]) * kw;
                }
            }
            (num, den)
        })
        .collect();
    let mut num = vec![0.0; chans * n];
    let mut den = vec![0.0; n];
    for (ty, (rn, rd)) in rows.into_iter().enumerate() {
        den[ty * w..(ty + 1) * w].copy_from_slice(&rd);
        for c in 0..chans {
            num[c * n + ty * w..c * n + (ty + 1) * w].copy_from_slice(&rn[c * w..(c + 1) * w]);
        }
    }
    (num, den)
}

/// In-frame, nonzero corner contributions `(source, target x, kernel weight)`
/// grouped by target row, each list in row-major source order.
fn stage(flow: &FlowField) -> Vec<Vec<(u32, u32, f64)>> {
    let (h, w) = flow.dims();
    let mut staged: Vec<Vec<(u32, u32, f64)>> = vec![Vec::new(); h];
    for y in 0..h {
        for x in 0..w {
            let q = y * w + x;
            for k in corners(x as f64 + flow.u[q], y as f64 + flow.v[q]) {
                if k.tx < 0 || k.ty < 0 || k.tx >= w as i64 || k.ty >= h as i64 {
                    continue;
                }
                let kw = k.kx * k.ky;
                if kw == 0.0 {
                    continue;
                }
                staged[k.ty as usize].push((q as u32, k.tx as u32, kw));
            }
        }
    }
    staged
}

/// Normalized output `sum_q (w_q k / den) x_q` at covered targets. A lone
/// contributor gets a coefficient of exactly 1, so unmoved pixels are copied
/// bit for bit. Holes keep the source value.
fn normalize(exec: Exec, payload: &FeatureMap, flow: &FlowField, weight: &[f64], den: &[f64]) -> FeatureMap {
    let (h, w) = payload.dims();
    let n = h * w;
    let chans = payload.channels;
    let staged = stage(flow);
    let row = |(ty, list): (usize, &Vec<(u32, u32, f64)>)| {
        let mut out = vec![0.0; chans * w];
        for &(q, tx, kw) in list {
            let (q, tx) = (q as usize, tx as usize);
            let d = den[ty * w + tx];
            if d <= COVERAGE_EPS {
                continue;
            }
            let a = weight[q] * kw / d;
            for c in 0..chans {
                out[c * w + tx] += a * payload.data[c * n + q];
            }
        }
        out
    };
    let rows: Vec<Vec<f64>> = if exec.is_parallel() {
        exec.install(|| staged.par_iter().enumerate().map(row).collect())
    } else {
        staged.iter().enumerate().map(row).collect()
    };
    let mut output = payload.clone();
    for (ty, r) in rows.into_iter().enumerate() {
        for tx in 0..w {
            let t = ty * w + tx;
            if den[t] > COVERAGE_EPS {
                for c in 0..chans {
                    output.data[c * n + t] = r[c * w + tx];
                }
            }
        }
    }
    output
}

/// Importance weights `exp(S - max S)`.
pub fn splat_weights(confidence: &ConfidenceMap) -> Vec<f64> {
    let m = confidence.s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    confidence.s.iter().map(|s| (s - m).exp()).collect()
}

/// Softmax splatting with `confidence` as log-space importance weight.
pub fn softmax_splat(payload: &FeatureMap, flow: &FlowField, confidence: &ConfidenceMap) -> Result<SplatResult> {
    softmax_splat_with(Exec::global(), payload, flow, confidence)
}

pub fn softmax_splat_with(
    exec: Exec,
    payload: &FeatureMap,
    flow: &FlowField,
    confidence: &ConfidenceMap,
) -> Result<SplatResult> {
    check_dims(payload, flow)?;
    if confidence.dims() != payload.dims() {
        return Err(Error::invalid("confidence map must match the payload plane"));
    }
    if confidence.s.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("confidence must be finite"));
    }
    let weight = splat_weights(confidence);
    let (numerator, denominator) = splat_sum_with(exec, payload, flow, &weight)?;
    let coverage: Vec<bool> = denominator.iter().map(|&d| d > COVERAGE_EPS).collect();
    let output = normalize(exec, payload, flow, &weight, &denominator);
    Ok(SplatResult { numerator, denominator, output, coverage })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warp::Semantics;

    fn map(data: Vec<f64>, c: usize, h: usize, w: usize) -> FeatureMap {
        FeatureMap::new(data, c, h, w, 0, Semantics::Generic).unwrap()
    }

    #[test]
    fn zero_flow_unit_weight_is_identity() {
        let p = map((0..24).map(|v| v as f64 * 0.5).collect(), 2, 3, 4);
        let (num, den) = splat_sum(&p, &FlowField::zeros(3, 4), &[1.0; 12]).unwrap();
        assert_eq!(num, p.data);
        assert!(den.iter().all(|&d| d == 1.0));
    }

    #[test]
    fn half_pixel_landing_splits_evenly() {
        let mut data = vec![0.0; 9];
        data[4] = 8.0;
        let p = map(data, 1, 3, 3);
        let mut flow = FlowField::uniform(3, 3, 10.0, 10.0);
        flow.set(1, 1, (0.5, 0.0));
        let (num, den) = splat_sum(&p, &flow, &[1.0; 9]).unwrap();
        assert_eq!((num[4], num[5]), (4.0, 4.0));
        assert_eq!((den[4], den[5]), (0.5, 0.5));
        assert_eq!(den.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn out_of_frame_is_dropped() {
        let p = map(vec![1.0; 6], 1, 2, 3);
        let (num, den) = splat_sum(&p, &FlowField::uniform(2, 3, 5.0, 0.0), &[1.0; 6]).unwrap();
        assert!(num.iter().chain(&den).all(|&v| v == 0.0));
    }

    #[test]
    fn collision_is_softmax_weighted() {
        let p = map(vec![10.0, 2.0], 1, 1, 2);
        let flow = FlowField::new(vec![1.0, 0.0], vec![0.0, 0.0], 1, 2).unwrap();
        let conf = ConfidenceMap::new(vec![3f64.ln(), 0.0], 1, 2).unwrap();
        let r = softmax_splat(&p, &flow, &conf).unwrap();
        assert!((r.output.data[1] - 8.0).abs() < 1e-12);
        assert!(!r.coverage[0]);
        assert_eq!(r.output.data[0], 10.0);
    }

    #[test]
    fn negative_weight_rejected() {
        let p = map(vec![1.0; 4], 1, 2, 2);
        assert!(splat_sum(&p, &FlowField::zeros(2, 2), &[1.0, -1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn row_staging_matches_reference() {
        let (h, w) = (9, 11);
        let data: Vec<f64> = (0..2 * h * w).map(|i| ((i * 37) % 17) as f64 / 3.0).collect();
        let p = map(data, 2, h, w);
        let u = (0..h * w).map(|i| ((i * 13) % 7) as f64 * 0.37 - 1.1).collect();
        let v = (0..h * w).map(|i| ((i * 5) % 11) as f64 * 0.29 - 1.4).collect();
        let flow = FlowField::new(u, v, h, w).unwrap();
        let weight: Vec<f64> = (0..h * w).map(|i| 0.1 + (i % 5) as f64).collect();
        let seq = scatter_sequential(&p, &flow, &weight);
        let par = Exec::Parallel(4).install(|| scatter_rows(&p, &flow, &weight));
        assert_eq!(seq, par);
    }
}
