use crate::error::{Error, Result};

/// Per-pixel displacement in pixels: a source pixel `q` maps to `q + (u, v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub height: usize,
    pub width: usize,
}

impl FlowField {
    pub fn zeros(height: usize, width: usize) -> Self {
        FlowField { u: vec![0.0; height * width], v: vec![0.0; height * width], height, width }
    }

    pub fn new(u: Vec<f64>, v: Vec<f64>, height: usize, width: usize) -> Result<Self> {
        if u.len() != height * width || v.len() != height * width {
            return Err(Error::invalid(format!("flow components must be {height}x{width}")));
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::invalid("flow must be finite"));
        }
        Ok(FlowField { u, v, height, width })
    }

    /// Same displacement at every pixel.
    pub fn uniform(height: usize, width: usize, du: f64, dv: f64) -> Self {
        FlowField { u: vec![du; height * width], v: vec![dv; height * width], height, width }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    pub fn set(&mut self, x: usize, y: usize, uv: (f64, f64)) {
        let i = y * self.width + x;
        self.u[i] = uv.0;
        self.v[i] = uv.1;
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().chain(&self.v).fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// `FLW1`, LE `u16 H`, `u16 W`, then `H*W` `(u, v)` f32 pairs.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = header(b"FLW1", self.height, self.width)?;
        for (u, v) in self.u.iter().zip(&self.v) {
            out.extend_from_slice(&(*u as f32).to_le_bytes());
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (h, w, body) = parse_header(bytes, b"FLW1", 8)?;
        let mut u = Vec::with_capacity(h * w);
        let mut v = Vec::with_capacity(h * w);
        for pair in body.chunks_exact(8) {
            u.push(f32::from_le_bytes(pair[0..4].try_into().unwrap()) as f64);
            v.push(f32::from_le_bytes(pair[4..8].try_into().unwrap()) as f64);
        }
        FlowField::new(u, v, h, w)
    }
}

/// Per-pixel log-precision of the flow.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceMap {
    pub s: Vec<f64>,
    pub height: usize,
    pub width: usize,
}

impl ConfidenceMap {
    pub fn constant(height: usize, width: usize, value: f64) -> Self {
        ConfidenceMap { s: vec![value; height * width], height, width }
    }

    pub fn new(s: Vec<f64>, height: usize, width: usize) -> Result<Self> {
        if s.len() != height * width {
            return Err(Error::invalid(format!("confidence must be {height}x{width}")));
        }
        if s.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("confidence must be finite"));
        }
        Ok(ConfidenceMap { s, height, width })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.s[y * self.width + x]
    }

    /// `CNF1`, LE `u16 H`, `u16 W`, then `H*W` f32 values.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = header(b"CNF1", self.height, self.width)?;
        for s in &self.s {
            out.extend_from_slice(&(*s as f32).to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (h, w, body) = parse_header(bytes, b"CNF1", 4)?;
        let s = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
        ConfidenceMap::new(s, h, w)
    }
}

fn header(magic: &[u8; 4], h: usize, w: usize) -> Result<Vec<u8>> {
    if h > u16::MAX as usize || w > u16::MAX as usize {
        return Err(Error::invalid(format!("dims {h}x{w} exceed the u16 header")));
    }
    let mut out = Vec::with_capacity(8 + h * w * 8);
    out.extend_from_slice(magic);
    out.extend_from_slice(&(h as u16).to_le_bytes());
    out.extend_from_slice(&(w as u16).to_le_bytes());
    Ok(out)
}

fn parse_header<'a>(bytes: &'a [u8], magic: &[u8; 4], per_pixel: usize) -> Result<(usize, usize, &'a [u8])> {
    if bytes.len() < 8 || &bytes[0..4] != magic {
        return Err(Error::parse_offset(0, format!("expected {} header", String::from_utf8_lossy(magic))));
    }
    let h = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
    let w = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let need = 8 + h * w * per_pixel;
    if bytes.len() != need {
        return Err(Error::parse_offset(
            bytes.len().min(need),
            format!("expected {need} bytes, found {}", bytes.len()),
        ));
    }
    Ok((h, w, &bytes[8..]))
}
