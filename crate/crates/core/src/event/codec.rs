//! CSV and `EVS1` binary event files.
//!
//! CSV: header `t_us,x,y,p`, one event per line, rows sorted by `t_us`.
//! Binary: magic `EVS1`, LE `u16 H`, `u16 W`, `u64 count`, then `count`
//! records of `(u64 t_us, u16 x, u16 y, i8 p, u8 pad)`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::event::{Event, EventStream};

pub const CSV_HEADER: &str = "t_us,x,y,p";
const MAGIC: &[u8; 4] = b"EVS1";
const RECORD_LEN: usize = 14;
const HEADER_LEN: usize = 4 + 2 + 2 + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventFormat {
    Csv,
    Bin,
}

impl EventFormat {
    /// Picks the format from the file extension (`.csv` or anything else).
    pub fn from_path(path: &Path) -> EventFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => EventFormat::Csv,
            _ => EventFormat::Bin,
        }
    }
}

/// Reads an event file. CSV carries no sensor size, so `dims` is required
/// there; when it is `None` the size is taken as the bounding box of the
/// events. For binary files `dims`, when given, must match the header.
pub fn read_events(path: &Path, format: EventFormat, dims: Option<(usize, usize)>) -> Result<EventStream> {
    let bytes = fs::read(path)?;
    match format {
        EventFormat::Csv => decode_csv(&String::from_utf8_lossy(&bytes), dims),
        EventFormat::Bin => {
            let s = decode_bin(&bytes)?;
            if let Some(d) = dims {
                if d != s.dims() {
                    return Err(Error::Format(format!("file dims {:?} differ from expected {:?}", s.dims(), d)));
                }
            }
            Ok(s)
        }
    }
}

pub fn write_events(stream: &EventStream, path: &Path, format: EventFormat) -> Result<()> {
    let bytes = match format {
        EventFormat::Csv => encode_csv(stream).into_bytes(),
        EventFormat::Bin => encode_bin(stream)?,
    };
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn encode_csv(stream: &EventStream) -> String {
    let mut out = String::with_capacity(16 * (stream.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for e in stream.events() {
        out.push_str(&format!("{},{},{},{}\n", e.t, e.x, e.y, e.p));
    }
    out
}

pub fn decode_csv(text: &str, dims: Option<(usize, usize)>) -> Result<EventStream> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        Some((_, h)) => return Err(Error::parse_line(1, format!("expected header `{CSV_HEADER}`, got `{h}`"))),
        None => return Err(Error::parse_line(1, "missing header")),
    }
    let mut events = Vec::new();
    let mut last_t = 0u64;
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::parse_line(lineno, format!("expected 4 fields, got {}", fields.len())));
        }
        let t: u64 = parse_field(fields[0], "t_us", lineno)?;
        let x: u16 = parse_field(fields[1], "x", lineno)?;
        let y: u16 = parse_field(fields[2], "y", lineno)?;
        let p: i8 = parse_field(fields[3], "p", lineno)?;
        if p != 1 && p != -1 {
            return Err(Error::parse_line(lineno, format!("polarity must be -1 or 1, got {p}")));
        }
        if t < last_t {
            return Err(Error::Format(format!("line {lineno}: timestamp {t} precedes {last_t}")));
        }
        last_t = t;
        events.push(Event { x, y, t, p });
    }
    let (h, w) = match dims {
        Some(d) => d,
        None => events.iter().fold((1, 1), |(h, w), e| (h.max(e.y as usize + 1), w.max(e.x as usize + 1))),
    };
    EventStream::new(events, h, w)
}

fn parse_field<T: std::str::FromStr>(s: &str, name: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::parse_line(line, format!("bad {name} value `{s}`")))
}

pub fn encode_bin(stream: &EventStream) -> Result<Vec<u8>> {
    let (h, w) = stream.dims();
    if h > u16::MAX as usize || w > u16::MAX as usize {
        return Err(Error::invalid(format!("dims {h}x{w} exceed the u16 header")));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * stream.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(h as u16).to_le_bytes());
    out.extend_from_slice(&(w as u16).to_le_bytes());
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    for e in stream.events() {
        out.extend_from_slice(&e.t.to_le_bytes());
        out.extend_from_slice(&e.x.to_le_bytes());
        out.extend_from_slice(&e.y.to_le_bytes());
        out.push(e.p as u8);
        out.push(0);
    }
    Ok(out)
}

pub fn decode_bin(bytes: &[u8]) -> Result<EventStream> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::parse_offset(0, "truncated header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::parse_offset(0, "bad magic, expected EVS1"));
    }
    let h = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
    let w = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let expected = count
        .checked_mul(RECORD_LEN)
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::parse_offset(8, "record count overflows"))?;
    if bytes.len() != expected {
        return Err(Error::parse_offset(
            bytes.len().min(expected),
            format!("expected {expected} bytes for {count} records, found {}", bytes.len()),
        ));
    }
    let mut events = Vec::with_capacity(count);
    let mut last_t = 0u64;
    for i in 0..count {
        let off = HEADER_LEN + i * RECORD_LEN;
        let r = &bytes[off..off + RECORD_LEN];
        let t = u64::from_le_bytes(r[0..8].try_into().unwrap());
        let x = u16::from_le_bytes([r[8], r[9]]);
        let y = u16::from_le_bytes([r[10], r[11]]);
        let p = r[12] as i8;
        if p != 1 && p != -1 {
            return Err(Error::parse_offset(off + 12, format!("polarity must be -1 or 1, got {p}")));
        }
        if x as usize >= w || y as usize >= h {
            return Err(Error::parse_offset(off + 8, format!("event ({x}, {y}) outside {h}x{w}")));
        }
        if t < last_t {
            return Err(Error::Format(format!("record {i} at offset {off}: timestamp {t} precedes {last_t}")));
        }
        last_t = t;
        events.push(Event { x, y, t, p });
    }
    EventStream::new(events, h, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_single_row() {
        let s = decode_csv("t_us,x,y,p\n100,5,7,-1\n", Some((8, 8))).unwrap();
        assert_eq!(s.events(), &[Event { x: 5, y: 7, t: 100, p: -1 }]);
    }

    #[test]
    fn csv_zero_polarity_is_parse_error() {
        let err = decode_csv("t_us,x,y,p\n100,5,7,0\n", Some((8, 8))).unwrap_err();
        match err {
            Error::Parse { location, .. } => assert_eq!(location, "line 2"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn csv_unsorted_is_format_error() {
        let err = decode_csv("t_us,x,y,p\n100,5,7,1\n99,5,7,1\n", Some((8, 8))).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn csv_malformed_reports_line() {
        let err = decode_csv("t_us,x,y,p\n1,2,3,1\nfoo,2,3,1\n", Some((8, 8))).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn bin_layout() {
        let s = EventStream::new(vec![Event { x: 1, y: 2, t: 3, p: -1 }], 4, 5).unwrap();
        let b = encode_bin(&s).unwrap();
        assert_eq!(&b[..4], b"EVS1");
        assert_eq!(b.len(), 16 + 14);
        assert_eq!(&b[4..8], &[4, 0, 5, 0]);
        assert_eq!(b[16 + 12], 0xff);
        assert_eq!(decode_bin(&b).unwrap(), s);
    }

    #[test]
    fn bin_truncated_and_bad_polarity() {
        let s = EventStream::new(vec![Event { x: 1, y: 2, t: 3, p: 1 }], 4, 5).unwrap();
        let mut b = encode_bin(&s).unwrap();
        assert!(decode_bin(&b[..b.len() - 1]).is_err());
        b[16 + 12] = 0;
        assert!(matches!(decode_bin(&b), Err(Error::Parse { .. })));
    }
}
