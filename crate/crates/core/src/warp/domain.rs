use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::motion::{ConfidenceMap, FlowField};
use crate::warp::{softmax_splat_with, FeatureMap, Semantics, SplatResult};

/// What gets forward-warped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WarpMode {
    /// Single-channel intensity; the consumer re-labels afterwards.
    Image,
    /// Hard one-hot labels, argmax-decoded after splatting.
    Segmentation,
    /// Soft multi-channel features.
    Feature,
}

impl WarpMode {
    pub const ALL: [WarpMode; 3] = [WarpMode::Image, WarpMode::Segmentation, WarpMode::Feature];

    pub fn name(self) -> &'static str {
        match self {
            WarpMode::Image => "image",
            WarpMode::Segmentation => "segmentation",
            WarpMode::Feature => "feature",
        }
    }
}

impl fmt::Display for WarpMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WarpMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WarpMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown warp mode '{s}'")))
    }
}

/// Forward-warps `payload` in the given domain.
///
/// In segmentation mode the covered output pixels are re-hardened to the
/// one-hot of their argmax class.
pub fn warp_domain(
    mode: WarpMode,
    payload: &FeatureMap,
    flow: &FlowField,
    confidence: &ConfidenceMap,
) -> Result<SplatResult> {
    warp_domain_with(Exec::global(), mode, payload, flow, confidence)
}

pub fn warp_domain_with(
    exec: Exec,
    mode: WarpMode,
    payload: &FeatureMap,
    flow: &FlowField,
    confidence: &ConfidenceMap,
) -> Result<SplatResult> {
    check_payload(mode, payload)?;
    let mut res = softmax_splat_with(exec, payload, flow, confidence)?;
    if mode == WarpMode::Segmentation {
        let n = payload.plane_len();
        let out = &mut res.output.data;
        for i in (0..n).filter(|&i| res.coverage[i]) {
            let mut best = 0;
            for c in 1..payload.channels {
                if out[c * n + i] > out[best * n + i] {
                    best = c;
                }
            }
            for c in 0..payload.channels {
                out[c * n + i] = if c == best { 1.0 } else { 0.0 };
            }
        }
    }
    Ok(res)
}

fn check_payload(mode: WarpMode, payload: &FeatureMap) -> Result<()> {
    let ok = match mode {
        WarpMode::Image => payload.semantics == Semantics::Intensity && payload.channels == 1,
        WarpMode::Segmentation => payload.semantics == Semantics::ClassProb && is_one_hot(payload),
        WarpMode::Feature => payload.semantics != Semantics::Intensity,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{mode} warping cannot take a {:?} payload with {} channels",
            payload.semantics, payload.channels
        )))
    }
}

fn is_one_hot(f: &FeatureMap) -> bool {
    let n = f.plane_len();
    (0..n).all(|i| {
        let mut ones = 0;
        for c in 0..f.channels {
            let v = f.data[c * n + i];
            if v == 1.0 {
                ones += 1;
            } else if v != 0.0 {
                return false;
            }
        }
        ones == 1
    })
}
