//! Readers and writers for recorded event streams.
//!
//! Two formats are supported:
//!
//! * AEDAT 2.0: `#`-prefixed ASCII header lines followed by 8-byte
//!   big-endian records (32-bit address word, 32-bit timestamp in ticks).
//!   How the address word maps onto `x`, `y` and polarity differs between
//!   sensors, so it is described by an [`AedatLayout`].
//! * A plain text format with one `t x y p` event per line.

use std::fmt::Write as _;

use thiserror::Error;

use crate::events::{Event, EventStream, Polarity, SensorGeometry};

const WRAP_TICKS: u64 = 1 << 32;
const WRAP_DETECT: u64 = 1 << 31;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("header line at byte {offset} is not valid text")]
    HeaderNotText { offset: usize },
    #[error("header line at byte {offset} is not terminated by a newline")]
    UnterminatedHeader { offset: usize },
    #[error("trailing partial record at byte {offset} ({len} of 8 bytes)")]
    PartialRecord { offset: usize, len: usize },
    #[error("record {record}: coordinate ({x}, {y}) outside {geometry} sensor")]
    OutOfBounds {
        record: usize,
        x: u32,
        y: u32,
        geometry: SensorGeometry,
    },
    #[error("record {record}: timestamp {current} ticks precedes previous {previous} ticks")]
    NonMonotone {
        record: usize,
        previous: u64,
        current: u64,
    },
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("invalid layout: {0}")]
    Layout(String),
}

/// Bit positions of the event fields inside an AEDAT 2.0 address word.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AedatLayout {
    pub x_shift: u8,
    pub x_bits: u8,
    pub y_shift: u8,
    pub y_bits: u8,
    pub polarity_shift: u8,
    /// Raw polarity bit value that means ON (+1).
    pub polarity_on_value: u8,
    /// Microseconds per timestamp tick.
    pub timestamp_unit_us: u32,
    /// When set, records with this bit high are not DVS events and are skipped.
    pub type_bit: Option<u8>,
}

impl AedatLayout {
    /// DVS-128: polarity bit 0 (0 = ON), x in bits 1..=7, y in bits 8..=14.
    pub const DVS128: AedatLayout = AedatLayout {
        x_shift: 1,
        x_bits: 7,
        y_shift: 8,
        y_bits: 7,
        polarity_shift: 0,
        polarity_on_value: 0,
        timestamp_unit_us: 1,
        type_bit: None,
    };

    /// DAViS240C: polarity bit 11 (1 = ON), x in bits 12..=21, y in bits
    /// 22..=30, bit 31 set for non-DVS (APS/IMU) records.
    pub const DAVIS240: AedatLayout = AedatLayout {
        x_shift: 12,
        x_bits: 10,
        y_shift: 22,
        y_bits: 9,
        polarity_shift: 11,
        polarity_on_value: 1,
        timestamp_unit_us: 1,
        type_bit: Some(31),
    };

    fn field_mask(shift: u8, bits: u8) -> u64 {
        ((1u64 << bits) - 1) << shift
    }

    /// Checks that fields fit in 32 bits, do not overlap, and can address
    /// every pixel of `geometry`.
    pub fn validate(&self, geometry: SensorGeometry) -> Result<(), ParseError> {
        let mut fields = vec![
            ("x", self.x_shift, self.x_bits),
            ("y", self.y_shift, self.y_bits),
            ("polarity", self.polarity_shift, 1),
        ];
        if let Some(bit) = self.type_bit {
            fields.push(("type", bit, 1));
        }
        let mut used = 0u64;
        for (name, shift, bits) in fields {
            if bits == 0 || bits > 16 || shift as u32 + bits as u32 > 32 {
                return Err(ParseError::Layout(format!(
                    "{name} field (shift {shift}, {bits} bits) does not fit a 32-bit word"
                )));
            }
            let mask = Self::field_mask(shift, bits);
            if used & mask != 0 {
                return Err(ParseError::Layout(format!(
                    "{name} field overlaps another field"
                )));
            }
            used |= mask;
        }
        if self.polarity_on_value > 1 {
            return Err(ParseError::Layout(
                "polarity on-value must be 0 or 1".into(),
            ));
        }
        if self.timestamp_unit_us == 0 {
            return Err(ParseError::Layout("timestamp unit must be positive".into()));
        }
        if geometry.width() > 1 << self.x_bits || geometry.height() > 1 << self.y_bits {
            return Err(ParseError::Layout(format!(
                "{geometry} sensor does not fit in {}x{} address bits",
                self.x_bits, self.y_bits
            )));
        }
        Ok(())
    }

    #[inline]
    fn decode(&self, address: u32) -> (u32, u32, Polarity) {
        let x = (address >> self.x_shift) & ((1 << self.x_bits) - 1);
        let y = (address >> self.y_shift) & ((1 << self.y_bits) - 1);
        let bit = ((address >> self.polarity_shift) & 1) as u8;
        let p = if bit == self.polarity_on_value {
            Polarity::On
        } else {
            Polarity::Off
        };
        (x, y, p)
    }

    #[inline]
    fn encode(&self, e: &Event) -> u32 {
        let bit = match e.p {
            Polarity::On => self.polarity_on_value,
            Polarity::Off => 1 - self.polarity_on_value,
        } as u32;
        ((e.x as u32) << self.x_shift)
            | ((e.y as u32) << self.y_shift)
            | (bit << self.polarity_shift)
    }
}

/// Counters collected while parsing.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParseStats {
    pub header_lines: usize,
    pub records: usize,
    pub events: usize,
    /// Records whose type bit marked them as non-DVS (APS frames, IMU samples, ...).
    pub skipped_non_dvs: usize,
    pub timestamp_wraps: usize,
    pub comment_lines: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Parsed {
    pub stream: EventStream,
    pub stats: ParseStats,
}

/// Parses an AEDAT 2.0 recording.
pub fn parse_aedat2(
    bytes: &[u8],
    layout: &AedatLayout,
    geometry: SensorGeometry,
) -> Result<Parsed, ParseError> {
    layout.validate(geometry)?;
    let mut stats = ParseStats::default();

    let mut pos = 0;
    while bytes.get(pos) == Some(&b'#') {
        let end = match bytes[pos..].iter().position(|&b| b == b'\n') {
            Some(n) => pos + n,
            None => return Err(ParseError::UnterminatedHeader { offset: pos }),
        };
        if std::str::from_utf8(&bytes[pos..end]).is_err() {
            return Err(ParseError::HeaderNotText { offset: pos });
        }
        stats.header_lines += 1;
        pos = end + 1;
    }

    let body = &bytes[pos..];
    let records = body.chunks_exact(8);
    let rest = records.remainder();
    if !rest.is_empty() {
        return Err(ParseError::PartialRecord {
            offset: bytes.len() - rest.len(),
            len: rest.len(),
        });
    }

    let unit = layout.timestamp_unit_us as u64;
    let mut events = Vec::with_capacity(body.len() / 8);
    let mut epoch = 0u64;
    let mut previous_raw: Option<u64> = None;
    let mut previous_ticks = 0u64;
    for (record, chunk) in records.enumerate() {
        let address = u32::from_be_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        let raw = u32::from_be_bytes([chunk[4], chunk[5], chunk[6], chunk[7]]) as u64;
        stats.records += 1;

        if let Some(prev) = previous_raw {
            if raw < prev && prev - raw > WRAP_DETECT {
                epoch += WRAP_TICKS;
                stats.timestamp_wraps += 1;
            }
        }
        previous_raw = Some(raw);
        let ticks = epoch + raw;

        if let Some(bit) = layout.type_bit {
            if (address >> bit) & 1 == 1 {
                stats.skipped_non_dvs += 1;
                continue;
            }
        }
        if ticks < previous_ticks {
            return Err(ParseError::NonMonotone {
                record,
                previous: previous_ticks,
                current: ticks,
            });
        }
        previous_ticks = ticks;

        let (x, y, p) = layout.decode(address);
        if x as usize >= geometry.width() || y as usize >= geometry.height() {
            return Err(ParseError::OutOfBounds {
                record,
                x,
                y,
                geometry,
            });
        }
        events.push(Event::new(x as u16, y as u16, ticks * unit, p));
    }
    stats.events = events.len();
    Ok(Parsed {
        stream: EventStream::new(geometry, events),
        stats,
    })
}

/// Writes `stream` as AEDAT 2.0. Timestamps are stored modulo 2^32 ticks,
/// which [`parse_aedat2`] undoes as long as consecutive events are less than
/// 2^31 ticks apart.
pub fn write_aedat2(stream: &EventStream, layout: &AedatLayout) -> Result<Vec<u8>, ParseError> {
    layout.validate(stream.geometry())?;
    let header = "#!AER-DAT2.0\r\n";
    let mut out = Vec::with_capacity(header.len() + stream.len() * 8);
    out.extend_from_slice(header.as_bytes());
    let unit = layout.timestamp_unit_us as u64;
    for e in stream.events() {
        out.extend_from_slice(&layout.encode(e).to_be_bytes());
        out.extend_from_slice(&(((e.t / unit) & 0xFFFF_FFFF) as u32).to_be_bytes());
    }
    Ok(out)
}

fn parse_line(line: &str, lineno: usize, geometry: SensorGeometry) -> Result<Event, ParseError> {
    let bad = |reason: String| ParseError::Line {
        line: lineno,
        reason,
    };
    let fields: Vec<&str> = line
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|f| !f.is_empty())
        .collect();
    if fields.len() != 4 {
        return Err(bad(format!(
            "expected 4 fields \"t x y p\", found {}",
            fields.len()
        )));
    }
    let t: u64 = fields[0]
        .parse()
        .map_err(|_| bad(format!("invalid timestamp {:?}", fields[0])))?;
    let x: u16 = fields[1]
        .parse()
        .map_err(|_| bad(format!("invalid x {:?}", fields[1])))?;
    let y: u16 = fields[2]
        .parse()
        .map_err(|_| bad(format!("invalid y {:?}", fields[2])))?;
    let p = match fields[3] {
        "1" | "+1" => Polarity::On,
        "-1" | "0" => Polarity::Off,
        other => {
            return Err(bad(format!(
                "invalid polarity {other:?}, expected 1, -1 or 0"
            )))
        }
    };
    if !geometry.contains(x, y) {
        return Err(bad(format!(
            "coordinate ({x}, {y}) outside {geometry} sensor"
        )));
    }
    Ok(Event::new(x, y, t, p))
}

/// Parses the text event format. Line numbers in errors are 1-based.
pub fn parse_text(text: &str, geometry: SensorGeometry) -> Result<Parsed, ParseError> {
    let mut stats = ParseStats::default();
    let mut events = Vec::new();
    let mut previous = 0u64;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            stats.comment_lines += 1;
            continue;
        }
        stats.records += 1;
        let e = parse_line(line, i + 1, geometry)?;
        if e.t < previous {
            return Err(ParseError::Line {
                line: i + 1,
                reason: format!("timestamp {} precedes previous timestamp {previous}", e.t),
            });
        }
        previous = e.t;
        events.push(e);
    }
    stats.events = events.len();
    Ok(Parsed {
        stream: EventStream::new(geometry, events),
        stats,
    })
}

/// Renders `stream` in the text format, one `t x y p` line per event.
pub fn write_text(stream: &EventStream) -> String {
    let mut out = String::with_capacity(stream.len() * 16);
    for e in stream.events() {
        // Writing to a String cannot fail.
        let _ = writeln!(out, "{} {} {} {}", e.t, e.x, e.y, e.p.as_i8());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(address: u32, ts: u32) -> [u8; 8] {
        let mut r = [0u8; 8];
        r[..4].copy_from_slice(&address.to_be_bytes());
        r[4..].copy_from_slice(&ts.to_be_bytes());
        r
    }

    fn file(header: &str, records: &[[u8; 8]]) -> Vec<u8> {
        let mut out = header.as_bytes().to_vec();
        for r in records {
            out.extend_from_slice(r);
        }
        out
    }

    #[test]
    fn header_only_file_is_empty_stream() {
        let p = parse_aedat2(
            b"#!AER-DAT2.0\n",
            &AedatLayout::DVS128,
            SensorGeometry::DVS128,
        )
        .unwrap();
        assert!(p.stream.is_empty());
        assert_eq!(p.stats.header_lines, 1);
    }

    #[test]
    fn dvs128_record_decodes_by_hand() {
        let bytes = file(
            "#!AER-DAT2.0\n",
            &[[0x00, 0x00, 0x12, 0x05, 0x00, 0x00, 0x00, 0x64]],
        );
        let p = parse_aedat2(&bytes, &AedatLayout::DVS128, SensorGeometry::DVS128).unwrap();
        assert_eq!(p.stream.events(), &[Event::new(2, 18, 100, Polarity::Off)]);
    }

    #[test]
    fn wraparound_adds_one_epoch() {
        let bytes = file("", &[record(0, 0xFFFF_FFFF), record(0, 1)]);
        let p = parse_aedat2(&bytes, &AedatLayout::DVS128, SensorGeometry::DVS128).unwrap();
        let ts: Vec<u64> = p.stream.events().iter().map(|e| e.t).collect();
        assert_eq!(ts, vec![4_294_967_295, 4_294_967_297]);
        assert_eq!(p.stats.timestamp_wraps, 1);
    }

    #[test]
    fn small_backwards_step_is_an_error() {
        let bytes = file("", &[record(0, 100), record(0, 50)]);
        let err = parse_aedat2(&bytes, &AedatLayout::DVS128, SensorGeometry::DVS128).unwrap_err();
        assert!(matches!(err, ParseError::NonMonotone { record: 1, .. }));
    }

    #[test]
    fn partial_record_reports_offset() {
        let mut bytes = file("#h\n", &[record(0, 1)]);
        bytes.extend_from_slice(&[1, 2, 3]);
        let err = parse_aedat2(&bytes, &AedatLayout::DVS128, SensorGeometry::DVS128).unwrap_err();
        assert_eq!(err, ParseError::PartialRecord { offset: 11, len: 3 });
    }

    #[test]
    fn non_utf8_header_is_rejected() {
        let bytes = b"#\xff\xfe\n".to_vec();
        let err = parse_aedat2(&bytes, &AedatLayout::DVS128, SensorGeometry::DVS128).unwrap_err();
        assert_eq!(err, ParseError::HeaderNotText { offset: 0 });
    }

    #[test]
    fn unterminated_header_is_rejected() {
        let err = parse_aedat2(b"#abc", &AedatLayout::DVS128, SensorGeometry::DVS128).unwrap_err();
        assert_eq!(err, ParseError::UnterminatedHeader { offset: 0 });
    }

    #[test]
    fn coordinate_outside_geometry_is_rejected() {
        let small = SensorGeometry::new(16, 16).unwrap();
        // x = 20
        let bytes = file("", &[record(0, 0), record(20 << 1, 5)]);
        let err = parse_aedat2(&bytes, &AedatLayout::DVS128, small).unwrap_err();
        assert!(matches!(
            err,
            ParseError::OutOfBounds {
                record: 1,
                x: 20,
                ..
            }
        ));
    }

    #[test]
    fn davis_type_bit_skips_and_counts() {
        let layout = AedatLayout::DAVIS240;
        let dvs = (239u32 << 12) | (179 << 22) | (1 << 11);
        let aps = 1u32 << 31;
        let bytes = file(
            "#!AER-DAT2.0\n",
            &[record(aps, 1), record(dvs, 2), record(aps, 3)],
        );
        let p = parse_aedat2(&bytes, &layout, SensorGeometry::DAVIS240).unwrap();
        assert_eq!(p.stream.events(), &[Event::new(239, 179, 2, Polarity::On)]);
        assert_eq!(p.stats.skipped_non_dvs, 2);
        assert_eq!(p.stats.records, 3);
    }

    #[test]
    fn timestamp_unit_scales_ticks() {
        let layout = AedatLayout {
            timestamp_unit_us: 10,
            ..AedatLayout::DVS128
        };
        let p = parse_aedat2(&file("", &[record(0, 7)]), &layout, SensorGeometry::DVS128).unwrap();
        assert_eq!(p.stream.events()[0].t, 70);
    }

    #[test]
    fn overlapping_layout_is_rejected() {
        let layout = AedatLayout {
            y_shift: 5,
            ..AedatLayout::DVS128
        };
        assert!(matches!(
            layout.validate(SensorGeometry::DVS128),
            Err(ParseError::Layout(_))
        ));
        assert!(AedatLayout::DVS128
            .validate(SensorGeometry::DAVIS240)
            .is_err());
        assert!(AedatLayout::DAVIS240
            .validate(SensorGeometry::DAVIS240)
            .is_ok());
    }

    #[test]
    fn aedat_writer_round_trips() {
        let events = vec![
            Event::new(1, 2, 10, Polarity::On),
            Event::new(127, 127, 10, Polarity::Off),
            Event::new(3, 4, 3_000_000_000, Polarity::Off),
            Event::new(0, 0, (1 << 32) + 5, Polarity::On),
        ];
        let s = EventStream::new(SensorGeometry::DVS128, events);
        let bytes = write_aedat2(&s, &AedatLayout::DVS128).unwrap();
        let p = parse_aedat2(&bytes, &AedatLayout::DVS128, SensorGeometry::DVS128).unwrap();
        assert_eq!(p.stream, s);
    }

    #[test]
    fn text_line_maps_fields() {
        let p = parse_text("100 2 18 1", SensorGeometry::DVS128).unwrap();
        assert_eq!(p.stream.events(), &[Event::new(2, 18, 100, Polarity::On)]);
        let p = parse_text("100 2 18 0", SensorGeometry::DVS128).unwrap();
        assert_eq!(p.stream.events()[0].p, Polarity::Off);
        let p = parse_text("100,2,18,-1\n", SensorGeometry::DVS128).unwrap();
        assert_eq!(p.stream.events()[0].p, Polarity::Off);
    }

    #[test]
    fn empty_text_is_empty_stream() {
        assert!(parse_text("", SensorGeometry::DVS128)
            .unwrap()
            .stream
            .is_empty());
        assert!(parse_text("# only a comment\n\n", SensorGeometry::DVS128)
            .unwrap()
            .stream
            .is_empty());
    }

    #[test]
    fn malformed_text_reports_line() {
        let err = parse_text("# c\n1 0 0 1\n2 0 0 5\n", SensorGeometry::DVS128).unwrap_err();
        assert!(matches!(err, ParseError::Line { line: 3, .. }), "{err}");
        let err = parse_text("1 0 0\n", SensorGeometry::DVS128).unwrap_err();
        assert!(matches!(err, ParseError::Line { line: 1, .. }));
        let err = parse_text("5 0 0 1\n4 0 0 1\n", SensorGeometry::DVS128).unwrap_err();
        assert!(matches!(err, ParseError::Line { line: 2, .. }));
        let err = parse_text("5 200 0 1\n", SensorGeometry::DVS128).unwrap_err();
        assert!(matches!(err, ParseError::Line { line: 1, .. }));
    }

    #[test]
    fn write_text_formats() {
        assert_eq!(write_text(&EventStream::empty(SensorGeometry::DVS128)), "");
        let s = EventStream::new(
            SensorGeometry::DVS128,
            vec![Event::new(2, 18, 100, Polarity::Off)],
        );
        assert_eq!(write_text(&s), "100 2 18 -1\n");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_stream() -> impl Strategy<Value = EventStream> {
            let ev = (0u16..128, 0u16..128, 0u64..(1 << 40), any::<bool>());
            prop::collection::vec(ev, 0..100).prop_map(|raw| {
                let mut events: Vec<Event> = raw
                    .into_iter()
                    .map(|(x, y, t, on)| {
                        Event::new(x, y, t, if on { Polarity::On } else { Polarity::Off })
                    })
                    .collect();
                events.sort_by_key(|e| e.t);
                EventStream::new(SensorGeometry::DVS128, events)
            })
        }

        proptest! {
            #[test]
            fn text_round_trip(s in arb_stream()) {
                let back = parse_text(&write_text(&s), s.geometry()).unwrap().stream;
                prop_assert_eq!(back, s);
            }

            #[test]
            fn aedat_timestamps_non_decreasing(raw in prop::collection::vec(any::<u32>(), 0..64)) {
                // Feed arbitrary raw timestamps; either a positioned error or a monotone stream.
                let mut bytes = Vec::new();
                for ts in &raw {
                    bytes.extend_from_slice(&record(0, *ts));
                }
                if let Ok(p) = parse_aedat2(&bytes, &AedatLayout::DVS128, SensorGeometry::DVS128) {
                    prop_assert!(p.stream.validate().is_empty());
                    prop_assert_eq!(p.stream.len(), raw.len());
                }
            }
        }
    }
}
