use crate::error::{Error, Result};
use crate::scene::{IntensityFrame, LabelMap};
use crate::warp::{FeatureMap, Semantics};

/// Weight of the uniform component mixed into keyframe one-hot features.
pub const DEFAULT_SMOOTHING: f64 = 0.05;

/// Everything known at a keyframe time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyframeState {
    pub frame: IntensityFrame,
    /// Class distribution per pixel, one channel per class.
    pub feature: FeatureMap,
    pub labels: LabelMap,
    pub t: u64,
    /// Keyframe interval in microseconds.
    pub interval: u64,
}

/// One-hot labels mixed with the uniform distribution:
/// `(1 - lambda) * onehot + lambda / K`.
pub fn encode_labels(labels: &LabelMap, lambda: f64) -> Result<FeatureMap> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("smoothing weight must lie in [0, 1], got {lambda}")));
    }
    let k = labels.num_classes;
    if k == 0 {
        return Err(Error::invalid("label map has no classes"));
    }
    let n = labels.labels.len();
    let floor = lambda / k as f64;
    let peak = (1.0 - lambda) + floor;
    let mut data = vec![floor; k * n];
    for (i, &l) in labels.labels.iter().enumerate() {
        let l = l as usize;
        if l >= k {
            return Err(Error::invalid(format!("label {l} outside [0, {k})")));
        }
        data[l * n + i] = peak;
    }
    FeatureMap::new(data, k, labels.height, labels.width, labels.timestamp, Semantics::ClassProb)
}

pub fn encode_keyframe(frame: &IntensityFrame, labels: &LabelMap, interval: u64) -> Result<KeyframeState> {
    encode_keyframe_with(frame, labels, interval, DEFAULT_SMOOTHING)
}

pub fn encode_keyframe_with(
    frame: &IntensityFrame,
    labels: &LabelMap,
    interval: u64,
    lambda: f64,
) -> Result<KeyframeState> {
    if (frame.height, frame.width) != labels.dims() {
        return Err(Error::invalid(format!(
            "frame is {}x{} but labels are {}x{}",
            frame.height, frame.width, labels.height, labels.width
        )));
    }
    if interval == 0 {
        return Err(Error::invalid("keyframe interval must be positive"));
    }
    Ok(KeyframeState {
        frame: frame.clone(),
        feature: encode_labels(labels, lambda)?,
        labels: labels.clone(),
        t: labels.timestamp,
        interval,
    })
}

/// Per-pixel argmax; ties go to the smallest class id.
pub fn decode_labels(feature: &FeatureMap) -> LabelMap {
    let n = feature.plane_len();
    let labels = (0..n)
        .map(|i| {
            let mut best = 0;
            for c in 1..feature.channels {
                if feature.data[c * n + i] > feature.data[best * n + i] {
                    best = c;
                }
            }
            best as u32
        })
        .collect();
    LabelMap {
        labels,
        height: feature.height,
        width: feature.width,
        timestamp: feature.timestamp,
        num_classes: feature.channels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: Vec<u32>, w: usize, k: usize) -> LabelMap {
        let h = v.len() / w;
        LabelMap::new(v, h, w, 5, k).unwrap()
    }

    #[test]
    fn smoothing_mixture_values() {
        let f = encode_labels(&labels(vec![3], 1, 11), 0.05).unwrap();
        assert_eq!(f.data[3], 0.95 + 0.05 / 11.0);
        assert!(f.data.iter().enumerate().all(|(c, &v)| c == 3 || v == 0.05 / 11.0));
        assert!(f.max_distribution_error() < 1e-12);
    }

    #[test]
    fn decode_inverts_encode() {
        let l = labels(vec![0, 4, 2, 2, 1, 3], 3, 5);
        for lambda in [0.0, 0.05, 0.49] {
            assert_eq!(decode_labels(&encode_labels(&l, lambda).unwrap()), l);
        }
        let hard = encode_labels(&l, 0.0).unwrap();
        assert!(hard.data.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn decode_ties_and_argmax() {
        let f = FeatureMap::new(vec![0.25, 0.2, 0.25, 0.5, 0.25, 0.3, 0.25, 0.0], 4, 1, 2, 0, Semantics::ClassProb)
            .unwrap();
        assert_eq!(decode_labels(&f).labels, vec![0, 1]);
    }

    #[test]
    fn mismatched_frame_rejected() {
        let l = labels(vec![0, 1], 2, 2);
        let frame = IntensityFrame { values: vec![1.0; 3], height: 1, width: 3, timestamp: 5 };
        assert!(encode_keyframe(&frame, &l, 100).is_err());
    }
}
