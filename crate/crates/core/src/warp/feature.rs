use crate::error::{Error, Result};

/// What the channels of a [`FeatureMap`] mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Semantics {
    /// Single-channel grayscale intensity.
    Intensity,
    /// Per-pixel class distribution, one channel per class.
    ClassProb,
    Generic,
}

/// Dense `C x H x W` feature map, channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub data: Vec<f64>,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub timestamp: u64,
    pub semantics: Semantics,
}

impl FeatureMap {
    pub fn new(
        data: Vec<f64>,
        channels: usize,
        height: usize,
        width: usize,
        timestamp: u64,
        semantics: Semantics,
    ) -> Result<Self> {
        if channels == 0 {
            return Err(Error::invalid("feature map needs at least one channel"));
        }
        if data.len() != channels * height * width {
            return Err(Error::invalid(format!(
                "feature data has {} values, expected {channels}x{height}x{width}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature values must be finite"));
        }
        if semantics == Semantics::Intensity && channels != 1 {
            return Err(Error::invalid("intensity maps have exactly one channel"));
        }
        Ok(FeatureMap { data, channels, height, width, timestamp, semantics })
    }

    pub fn zeros(channels: usize, height: usize, width: usize, semantics: Semantics) -> Self {
        FeatureMap { data: vec![0.0; channels * height * width], channels, height, width, timestamp: 0, semantics }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, x: usize, y: usize, value: f64) {
        self.data[(c * self.height + y) * self.width + x] = value;
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    /// All channels at one pixel.
    pub fn pixel(&self, x: usize, y: usize) -> Vec<f64> {
        let (n, i) = (self.plane_len(), y * self.width + x);
        (0..self.channels).map(|c| self.data[c * n + i]).collect()
    }

    pub fn with_timestamp(mut self, timestamp: u64) -> Self {
        self.timestamp = timestamp;
        self
    }

    /// Largest per-pixel deviation of the channel sum from 1.
    pub fn max_distribution_error(&self) -> f64 {
        let n = self.plane_len();
        (0..n)
            .map(|i| {
                let s: f64 = (0..self.channels).map(|c| self.data[c * n + i]).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `FTR1`, LE `u16 C`, `u16 H`, `u16 W`, then f32 values channel-major.
    /// Timestamp and semantics are not stored; decoding yields generic maps.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(10 + 4 * self.data.len());
        out.extend_from_slice(b"FTR1");
        for d in [self.channels, self.height, self.width] {
            let d = u16::try_from(d).map_err(|_| Error::invalid(format!("dimension {d} exceeds u16")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 10 || &bytes[0..4] != b"FTR1" {
            return Err(Error::Format("missing FTR1 header".into()));
        }
        let dim = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]) as usize;
        let (c, h, w) = (dim(4), dim(6), dim(8));
        let body = &bytes[10..];
        if body.len() != 4 * c * h * w {
            return Err(Error::parse_offset(
                10 + body.len().min(4 * c * h * w),
                format!("expected {} data bytes, found {}", 4 * c * h * w, body.len()),
            ));
        }
        let data = body.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64).collect();
        FeatureMap::new(data, c, h, w, 0, Semantics::Generic)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_channel_major() {
        let f = FeatureMap::new((0..12).map(f64::from).collect(), 2, 2, 3, 0, Semantics::Generic).unwrap();
        assert_eq!(f.get(1, 2, 0), 8.0);
        assert_eq!(f.pixel(1, 1), vec![4.0, 10.0]);
    }

    #[test]
    fn bytes_round_trip() {
        let f = FeatureMap::new(vec![0.5, -1.25, 3.0, 0.0, 2.0, 1.0], 3, 1, 2, 7, Semantics::Generic).unwrap();
        let g = FeatureMap::from_bytes(&f.to_bytes().unwrap()).unwrap();
        assert_eq!(g.data, f.data);
        assert_eq!((g.channels, g.height, g.width), (3, 1, 2));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(FeatureMap::new(vec![0.0; 5], 2, 1, 3, 0, Semantics::Generic).is_err());
        assert!(FeatureMap::new(vec![0.0; 6], 2, 1, 3, 0, Semantics::Intensity).is_err());
        assert!(FeatureMap::new(vec![f64::NAN], 1, 1, 1, 0, Semantics::Generic).is_err());
        assert!(FeatureMap::from_bytes(b"FTR1\x01\x00\x01\x00\x01\x00").is_err());
    }
}
