use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::motion::{ConfidenceMap, FlowField};
use crate::warp::splat::{corners, softmax_splat_with, splat_weights};
use crate::warp::FeatureMap;

/// Gradients of a scalar loss through [`softmax_splat`](crate::warp::softmax_splat).
#[derive(Clone, Debug, PartialEq)]
pub struct SplatGradients {
    /// `C x H x W`, same layout as the payload.
    pub payload: Vec<f64>,
    pub confidence: Vec<f64>,
    pub flow_u: Vec<f64>,
    pub flow_v: Vec<f64>,
}

/// Analytic backward pass of softmax splatting given `upstream = dL/d output`.
///
/// Holes pass their upstream gradient straight to the source payload. At
/// bilinear breakpoints the flow gradient uses right derivatives.
pub fn splat_gradients(
    payload: &FeatureMap,
    flow: &FlowField,
    confidence: &ConfidenceMap,
    upstream: &[f64],
) -> Result<SplatGradients> {
    let fwd = softmax_splat_with(Exec::Sequential, payload, flow, confidence)?;
    if upstream.len() != payload.data.len() {
        return Err(Error::invalid("upstream gradient must match the payload shape"));
    }
    let (h, w) = payload.dims();
    let n = h * w;
    let chans = payload.channels;
    let weight = splat_weights(confidence);
    let out = &fwd.output.data;
    let mut g = SplatGradients {
        payload: vec![0.0; chans * n],
        confidence: vec![0.0; n],
        flow_u: vec![0.0; n],
        flow_v: vec![0.0; n],
    };
    for q in 0..n {
        if !fwd.coverage[q] {
            for c in 0..chans {
                g.payload[c * n + q] += upstream[c * n + q];
            }
        }
    }
    for y in 0..h {
        for x in 0..w {
            let q = y * w + x;
            let e = weight[q];
            for k in corners(x as f64 + flow.u[q], y as f64 + flow.v[q]) {
                if k.tx < 0 || k.ty < 0 || k.tx >= w as i64 || k.ty >= h as i64 {
                    continue;
                }
                let p = k.ty as usize * w + k.tx as usize;
                if !fwd.coverage[p] {
                    continue;
                }
                let coef = e / fwd.denominator[p];
                let kw = k.kx * k.ky;
                let mut agree = 0.0;
                for c in 0..chans {
                    let up = upstream[c * n + p];
                    g.payload[c * n + q] += coef * kw * up;
                    agree += up * (payload.data[c * n + q] - out[c * n + p]);
                }
                g.confidence[q] += coef * kw * agree;
                g.flow_u[q] += coef * k.dkx * k.ky * agree;
                g.flow_v[q] += coef * k.kx * k.dky * agree;
            }
        }
    }
    Ok(g)
}
