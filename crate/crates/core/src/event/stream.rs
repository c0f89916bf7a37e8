use crate::error::{Error, Result};

/// A single brightness-change record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    /// Timestamp in microseconds.
    pub t: u64,
    /// +1 or -1.
    pub p: i8,
}

impl Event {
    pub fn new(x: u16, y: u16, t: u64, p: i8) -> Result<Self> {
        if p != 1 && p != -1 {
            return Err(Error::invalid(format!("polarity must be +1 or -1, got {p}")));
        }
        Ok(Event { x, y, t, p })
    }
}

/// Time-sorted events from one sensor.
///
/// Besides the events themselves a stream may carry the time span it is known
/// to cover. A quiet scene produces no events but still covers its recording
/// window, and the pipeline needs that to tell "nothing happened" apart from
/// "no data".
#[derive(Clone, Debug)]
pub struct EventStream {
    events: Vec<Event>,
    height: usize,
    width: usize,
    span: Option<(u64, u64)>,
}

impl PartialEq for EventStream {
    fn eq(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width && self.events == other.events
    }
}

impl EventStream {
    /// Validates ordering, polarity and sensor bounds.
    pub fn new(events: Vec<Event>, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 || height > u16::MAX as usize + 1 || width > u16::MAX as usize + 1 {
            return Err(Error::invalid(format!("bad sensor dims {height}x{width}")));
        }
        for (i, e) in events.iter().enumerate() {
            if e.p != 1 && e.p != -1 {
                return Err(Error::invalid(format!("event {i}: polarity {}", e.p)));
            }
            if e.x as usize >= width || e.y as usize >= height {
                return Err(Error::invalid(format!("event {i} at ({}, {}) outside {height}x{width}", e.x, e.y)));
            }
        }
        if let Some(i) = events.windows(2).position(|w| w[1].t < w[0].t) {
            return Err(Error::Format(format!(
                "timestamps not sorted at event {}: {} < {}",
                i + 1,
                events[i + 1].t,
                events[i].t
            )));
        }
        Ok(EventStream { events, height, width, span: None })
    }

    pub fn empty(height: usize, width: usize) -> Result<Self> {
        Self::new(Vec::new(), height, width)
    }

    /// Declares the half-open span `[t0, t1)` this stream covers. Every event
    /// must fall inside it.
    pub fn with_span(mut self, t0: u64, t1: u64) -> Result<Self> {
        if t1 < t0 {
            return Err(Error::invalid(format!("span end {t1} before start {t0}")));
        }
        if let (Some(first), Some(last)) = (self.events.first(), self.events.last()) {
            if first.t < t0 || last.t >= t1 {
                return Err(Error::invalid(format!(
                    "events [{}, {}] fall outside declared span [{t0}, {t1})",
                    first.t, last.t
                )));
            }
        }
        self.span = Some((t0, t1));
        Ok(self)
    }

    /// The declared span, or the span implied by the first and last events.
    pub fn coverage(&self) -> Option<(u64, u64)> {
        self.span.or_else(|| match (self.events.first(), self.events.last()) {
            (Some(a), Some(b)) => Some((a.t, b.t + 1)),
            _ => None,
        })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Events with `t0 <= t < t1`, order preserved.
    pub fn slice(&self, t0: u64, t1: u64) -> EventStream {
        let (lo, hi) = if t1 <= t0 {
            (0, 0)
        } else {
            (self.events.partition_point(|e| e.t < t0), self.events.partition_point(|e| e.t < t1))
        };
        let span = match self.coverage() {
            Some((a, b)) => {
                let s = a.max(t0);
                let e = b.min(t1).max(s);
                Some((s, e))
            }
            None => None,
        };
        EventStream { events: self.events[lo..hi].to_vec(), height: self.height, width: self.width, span }
    }

    pub fn polarity_sum(&self) -> i64 {
        self.events.iter().map(|e| e.p as i64).sum()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(ts: &[u64]) -> EventStream {
        let ev = ts.iter().map(|&t| Event::new(1, 1, t, 1).unwrap()).collect();
        EventStream::new(ev, 4, 4).unwrap()
    }

    #[test]
    fn slice_is_half_open() {
        let s = stream(&[10, 20, 30]);
        let sl = s.slice(15, 30);
        assert_eq!(sl.len(), 1);
        assert_eq!(sl.events()[0].t, 20);
        assert!(s.slice(20, 20).is_empty());
        assert_eq!(s.slice(0, 31), s);
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn rejects_unsorted_and_out_of_bounds() {
        let ev = vec![Event::new(0, 0, 5, 1).unwrap(), Event::new(0, 0, 4, 1).unwrap()];
        assert!(matches!(EventStream::new(ev, 2, 2), Err(Error::Format(_))));
        let ev = vec![Event::new(2, 0, 5, 1).unwrap()];
        assert!(matches!(EventStream::new(ev, 2, 2), Err(Error::InvalidArgument(_))));
        assert!(Event::new(0, 0, 0, 0).is_err());
    }

    #[test]
    fn declared_span_survives_slicing() {
        let s = EventStream::empty(3, 3).unwrap().with_span(0, 1000).unwrap();
        assert_eq!(s.slice(100, 400).coverage(), Some((100, 400)));
        assert_eq!(s.slice(900, 2000).coverage(), Some((900, 1000)));
    }
}
