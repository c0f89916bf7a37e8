//! Bounded store of past deep features and per-pixel attention over it.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::warp::FeatureMap;

pub const DEFAULT_CAPACITY: usize = 4;
pub const DEFAULT_TEMPERATURE: f64 = 1.0;

/// FIFO bank of `(timestamp, feature)` entries with strictly increasing
/// timestamps.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryBank {
    capacity: usize,
    temperature: f64,
    entries: VecDeque<(u64, FeatureMap)>,
}

impl Default for MemoryBank {
    fn default() -> Self {
        MemoryBank::new(DEFAULT_CAPACITY, DEFAULT_TEMPERATURE).expect("valid defaults")
    }
}

impl MemoryBank {
    pub fn new(capacity: usize, temperature: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("memory capacity must be >= 1"));
        }
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::invalid(format!("temperature must be positive, got {temperature}")));
        }
        Ok(MemoryBank { capacity, temperature, entries: VecDeque::with_capacity(capacity + 1) })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn timestamps(&self) -> Vec<u64> {
        self.entries.iter().map(|(t, _)| *t).collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = (u64, &FeatureMap)> {
        self.entries.iter().map(|(t, f)| (*t, f))
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    /// Appends an entry, evicting the oldest once over capacity.
    pub fn push(&mut self, feature: FeatureMap, timestamp: u64) -> Result<()> {
        if let Some((last, first)) = self.entries.back().map(|(t, _)| *t).zip(self.entries.front()) {
            if timestamp <= last {
                return Err(Error::invalid(format!("memory timestamps must increase: {timestamp} after {last}")));
            }
            let f = &first.1;
            if (f.channels, f.height, f.width) != (feature.channels, feature.height, feature.width) {
                return Err(Error::invalid("memory entries must share one shape"));
            }
        }
        self.entries.push_back((timestamp, feature));
        while self.entries.len() > self.capacity {
            self.entries.pop_front();
        }
        Ok(())
    }

    /// Attention weights at pixel `(x, y)`: one per entry in bank order, then
    /// the query's self weight last.
    pub fn attention_weights(&self, query: &FeatureMap, x: usize, y: usize) -> Result<Vec<f64>> {
        self.check_query(query)?;
        let mut cands = Vec::with_capacity(self.len() + 1);
        for (_, f) in &self.entries {
            cands.push(f.pixel(x, y));
        }
        cands.push(query.pixel(x, y));
        let mut weights = vec![0.0; cands.len()];
        let q = &cands[cands.len() - 1];
        softmax_logits(q, cands.iter().map(|v| v.as_slice()), self.scale(query.channels), &mut weights);
        Ok(weights)
    }

    fn scale(&self, channels: usize) -> f64 {
        1.0 / (self.temperature * (channels as f64).sqrt())
    }

    fn check_query(&self, query: &FeatureMap) -> Result<()> {
        if let Some((_, f)) = self.entries.front() {
            if (f.channels, f.height, f.width) != (query.channels, query.height, query.width) {
                return Err(Error::invalid(format!(
                    "query is {}x{}x{} but memory holds {}x{}x{}",
                    query.channels, query.height, query.width, f.channels, f.height, f.width
                )));
            }
        }
        Ok(())
    }
}

fn softmax_logits<'a>(q: &[f64], cands: impl Iterator<Item = &'a [f64]>, scale: f64, out: &mut [f64]) {
    for (o, c) in out.iter_mut().zip(cands) {
        *o = scale * q.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
    }
    let m = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = (*o - m).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Index of the largest value; ties go to the smallest index.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn mem_push(bank: &mut MemoryBank, feature: FeatureMap, timestamp: u64) -> Result<()> {
    bank.push(feature, timestamp)
}

/// Per-pixel attention of `query` over the bank entries plus itself.
///
/// Logits are `<query, entry> / (tau * sqrt(C))` with identity projections.
/// The output is written as `query + sum_i w_i (v_i - query)` so identical
/// candidates reproduce the query exactly.
pub fn mem_enhance(bank: &MemoryBank, query: &FeatureMap) -> Result<FeatureMap> {
    mem_enhance_with(Exec::global(), bank, query)
}

pub fn mem_enhance_with(exec: Exec, bank: &MemoryBank, query: &FeatureMap) -> Result<FeatureMap> {
    enhance(exec, bank, query, None)
}

/// [`mem_enhance`] where pixel `i` ignores every entry whose argmax class is
/// `vacated[i]`. Used at splat holes: whatever the keyframe showed there has
/// moved away, so history agreeing with it is stale.
pub fn mem_enhance_vacated(
    exec: Exec,
    bank: &MemoryBank,
    query: &FeatureMap,
    vacated: &[Option<usize>],
) -> Result<FeatureMap> {
    if vacated.len() != query.plane_len() {
        return Err(Error::invalid("vacated mask must match the query plane"));
    }
    enhance(exec, bank, query, Some(vacated))
}

fn enhance(exec: Exec, bank: &MemoryBank, query: &FeatureMap, vacated: Option<&[Option<usize>]>) -> Result<FeatureMap> {
    bank.check_query(query)?;
    if bank.is_empty() {
        return Ok(query.clone());
    }
    let (h, w) = query.dims();
    let n = h * w;
    let chans = query.channels;
    let scale = bank.scale(chans);
    let stored: Vec<&FeatureMap> = bank.entries.iter().map(|(_, f)| f).collect();
    let row = |y: usize| -> Vec<f64> {
        let mut out = vec![0.0; chans * w];
        let mut weights = Vec::with_capacity(stored.len() + 1);
        let mut cands: Vec<Vec<f64>> = Vec::with_capacity(stored.len() + 1);
        for x in 0..w {
            let i = y * w + x;
            let skip = vacated.and_then(|v| v[i]);
            cands.clear();
            for f in &stored {
                let v: Vec<f64> = (0..chans).map(|c| f.data[c * n + i]).collect();
                if skip.is_none_or(|k| argmax(&v) != k) {
                    cands.push(v);
                }
            }
            cands.push((0..chans).map(|c| query.data[c * n + i]).collect());
            let last = cands.len() - 1;
            weights.resize(cands.len(), 0.0);
            softmax_logits(&cands[last], cands.iter().map(|v| v.as_slice()), scale, &mut weights);
            for c in 0..chans {
                let q = cands[last][c];
                let delta: f64 = cands[..last].iter().zip(&weights).map(|(v, wt)| wt * (v[c] - q)).sum();
                out[c * w + x] = q + delta;
            }
        }
        out
    };
    let rows: Vec<Vec<f64>> = if exec.is_parallel() {
        exec.install(|| (0..h).into_par_iter().map(row).collect())
    } else {
        (0..h).map(row).collect()
    };
    let mut result = query.clone();
    for (y, r) in rows.into_iter().enumerate() {
        for c in 0..chans {
            result.data[c * n + y * w..c * n + (y + 1) * w].copy_from_slice(&r[c * w..(c + 1) * w]);
        }
    }
    Ok(result)
}
