//! Event-stream I/O: the EVS1 binary container and a CSV interchange format.
//!
//! EVS1 layout: an 8-octet header — magic `"EVS1"`, width (u16 LE), height
//! (u16 LE) — followed by 14-octet records: t (u64 LE, microseconds),
//! x (u16 LE), y (u16 LE), polarity (u8: 0 = off, 1 = on), gray (u8).
//! All multi-byte integers are little-endian. Timestamps must be
//! non-decreasing within a stream; a regression is an error, never a reorder.

use std::io::{BufRead, Write};

use thiserror::Error;

/// Leading bytes of every EVS1 stream.
pub const EVS1_MAGIC: [u8; 4] = *b"EVS1";
/// Header size in octets.
pub const EVS1_HEADER_LEN: usize = 8;
/// Record size in octets.
pub const EVS1_RECORD_LEN: usize = 14;
/// Mandatory first line of the CSV interchange format.
pub const CSV_HEADER: &str = "t_us,x,y,polarity,gray";

#[derive(Debug, Error, PartialEq)]
pub enum EventIoError {
    #[error("bad magic: stream does not start with \"EVS1\"")]
    BadMagic,
    #[error("truncated stream: {len} bytes is not a header plus a whole number of records")]
    TruncatedRecord { len: usize },
    #[error("record {index}: coordinate ({x}, {y}) outside sensor {width}x{height}")]
    CoordOutOfRange {
        index: usize,
        x: u16,
        y: u16,
        width: u16,
        height: u16,
    },
    #[error("record {index}: timestamp {t} regresses below {prev}")]
    TimestampRegression { index: usize, prev: u64, t: u64 },
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("csv line {line}: {msg}")]
    CsvParse { line: usize, msg: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for EventIoError {
    fn from(e: std::io::Error) -> Self {
        EventIoError::Io(e.to_string())
    }
}

/// Event polarity: whether the pixel brightened (`On`) or darkened (`Off`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Off,
    On,
}

impl Polarity {
    pub fn as_byte(self) -> u8 {
        match self {
            Polarity::Off => 0,
            Polarity::On => 1,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Polarity::Off),
            1 => Some(Polarity::On),
            _ => None,
        }
    }
}

/// One sensor event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    /// Timestamp in microseconds.
    pub t: u64,
    /// Column index.
    pub x: u16,
    /// Row index.
    pub y: u16,
    pub polarity: Polarity,
    /// Intensity reading at the event pixel, 0-255.
    pub gray: u8,
}

/// Sensor geometry carried at the head of every stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub width: u16,
    pub height: u16,
}

impl StreamHeader {
    /// Default sensor geometry, 1280x800.
    pub const DEFAULT: StreamHeader = StreamHeader {
        width: 1280,
        height: 800,
    };

    pub fn new(width: u16, height: u16) -> Result<Self, EventIoError> {
        if width == 0 || height == 0 {
            return Err(EventIoError::InvariantViolation(format!(
                "geometry {width}x{height} must be at least 1x1"
            )));
        }
        Ok(StreamHeader { width, height })
    }

    pub fn contains(&self, x: u16, y: u16) -> bool {
        x < self.width && y < self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

fn check_events(header: &StreamHeader, events: &[Event]) -> Result<(), EventIoError> {
    let mut prev_t = 0u64;
    for (index, e) in events.iter().enumerate() {
        if !header.contains(e.x, e.y) {
            return Err(EventIoError::CoordOutOfRange {
                index,
                x: e.x,
                y: e.y,
                width: header.width,
                height: header.height,
            });
        }
        if e.t < prev_t {
            return Err(EventIoError::TimestampRegression {
                index,
                prev: prev_t,
                t: e.t,
            });
        }
        prev_t = e.t;
    }
    Ok(())
}

/// Parse an EVS1 byte buffer into its header and events.
///
/// Rejects trailing partial records rather than truncating silently.
pub fn read_stream(bytes: &[u8]) -> Result<(StreamHeader, Vec<Event>), EventIoError> {
    if bytes.len() < EVS1_MAGIC.len() || bytes[..EVS1_MAGIC.len()] != EVS1_MAGIC {
        return Err(EventIoError::BadMagic);
    }
    if bytes.len() < EVS1_HEADER_LEN || (bytes.len() - EVS1_HEADER_LEN) % EVS1_RECORD_LEN != 0 {
        return Err(EventIoError::TruncatedRecord { len: bytes.len() });
    }
    let width = u16::from_le_bytes([bytes[4], bytes[5]]);
    let height = u16::from_le_bytes([bytes[6], bytes[7]]);
    let header = StreamHeader::new(width, height)?;

    let n = (bytes.len() - EVS1_HEADER_LEN) / EVS1_RECORD_LEN;
    let mut events = Vec::with_capacity(n);
    for index in 0..n {
        let r = &bytes[EVS1_HEADER_LEN + index * EVS1_RECORD_LEN..][..EVS1_RECORD_LEN];
        let t = u64::from_le_bytes(r[0..8].try_into().unwrap());
        let x = u16::from_le_bytes([r[8], r[9]]);
        let y = u16::from_le_bytes([r[10], r[11]]);
        let polarity = Polarity::from_byte(r[12]).ok_or_else(|| {
            EventIoError::InvariantViolation(format!(
                "record {index}: polarity byte {} is not 0 or 1",
                r[12]
            ))
        })?;
        events.push(Event {
            t,
            x,
            y,
            polarity,
            gray: r[13],
        });
    }
    check_events(&header, &events)?;
    Ok((header, events))
}

/// Serialize a header and events to EVS1 bytes. Bit-exact inverse of
/// [`read_stream`].
pub fn write_stream(header: &StreamHeader, events: &[Event]) -> Result<Vec<u8>, EventIoError> {
    StreamHeader::new(header.width, header.height)?;
    check_events(header, events).map_err(|e| match e {
        EventIoError::CoordOutOfRange { index, x, y, .. } => EventIoError::InvariantViolation(
            format!("event {index}: ({x}, {y}) outside {}x{}", header.width, header.height),
        ),
        EventIoError::TimestampRegression { index, prev, t } => EventIoError::InvariantViolation(
            format!("event {index}: timestamp {t} regresses below {prev}"),
        ),
        other => other,
    })?;

    let mut out = Vec::with_capacity(EVS1_HEADER_LEN + events.len() * EVS1_RECORD_LEN);
    out.extend_from_slice(&EVS1_MAGIC);
    out.extend_from_slice(&header.width.to_le_bytes());
    out.extend_from_slice(&header.height.to_le_bytes());
    for e in events {
        out.extend_from_slice(&e.t.to_le_bytes());
        out.extend_from_slice(&e.x.to_le_bytes());
        out.extend_from_slice(&e.y.to_le_bytes());
        out.push(e.polarity.as_byte());
        out.push(e.gray);
    }
    Ok(out)
}

/// Read events from the CSV interchange format, validating them against the
/// given sensor geometry (the CSV file itself carries no geometry).
pub fn read_csv_events<R: BufRead>(
    reader: R,
    header: &StreamHeader,
) -> Result<Vec<Event>, EventIoError> {
    let mut events = Vec::new();
    let mut lines = reader.lines();
    let first = lines
        .next()
        .transpose()?
        .ok_or(EventIoError::CsvParse {
            line: 1,
            msg: "empty file, expected header line".into(),
        })?;
    if first.trim_end_matches('\r') != CSV_HEADER {
        return Err(EventIoError::CsvParse {
            line: 1,
            msg: format!("expected header \"{CSV_HEADER}\", got \"{first}\""),
        });
    }
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(EventIoError::CsvParse {
                line: line_no,
                msg: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let parse = |col: usize, name: &str| -> Result<u64, EventIoError> {
            fields[col].trim().parse::<u64>().map_err(|e| EventIoError::CsvParse {
                line: line_no,
                msg: format!("column {} ({name}): {e}", col + 1),
            })
        };
        let t = parse(0, "t_us")?;
        let x = parse(1, "x")?;
        let y = parse(2, "y")?;
        let p = parse(3, "polarity")?;
        let gray = parse(4, "gray")?;
        let field_err = |col: usize, msg: String| EventIoError::CsvParse {
            line: line_no,
            msg: format!("column {}: {msg}", col + 1),
        };
        let x = u16::try_from(x).map_err(|_| field_err(1, format!("{x} exceeds u16")))?;
        let y = u16::try_from(y).map_err(|_| field_err(2, format!("{y} exceeds u16")))?;
        let polarity = u8::try_from(p)
            .ok()
            .and_then(Polarity::from_byte)
            .ok_or_else(|| field_err(3, format!("polarity {p} is not 0 or 1")))?;
        let gray = u8::try_from(gray).map_err(|_| field_err(4, format!("{gray} exceeds u8")))?;
        events.push(Event {
            t,
            x,
            y,
            polarity,
            gray,
        });
    }
    check_events(header, &events)?;
    Ok(events)
}

/// Write events in the CSV interchange format.
pub fn write_csv_events<W: Write>(writer: &mut W, events: &[Event]) -> Result<(), EventIoError> {
    writeln!(writer, "{CSV_HEADER}")?;
    for e in events {
        writeln!(
            writer,
            "{},{},{},{},{}",
            e.t,
            e.x,
            e.y,
            e.polarity.as_byte(),
            e.gray
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(t: u64, x: u16, y: u16, on: bool, gray: u8) -> Event {
        Event {
            t,
            x,
            y,
            polarity: if on { Polarity::On } else { Polarity::Off },
            gray,
        }
    }

    #[test]
    fn header_only_stream_is_eight_bytes() {
        let h = StreamHeader::DEFAULT;
        let bytes = write_stream(&h, &[]).unwrap();
        assert_eq!(bytes.len(), EVS1_HEADER_LEN);
        let (rh, events) = read_stream(&bytes).unwrap();
        assert_eq!(rh, h);
        assert!(events.is_empty());
    }

    #[test]
    fn hand_encoded_record_parses_per_layout() {
        // magic | 1280 LE | 800 LE | t=1000 | x=5 | y=7 | on | gray=128
        let mut bytes = vec![b'E', b'V', b'S', b'1', 0x00, 0x05, 0x20, 0x03];
        bytes.extend_from_slice(&1000u64.to_le_bytes());
        bytes.extend_from_slice(&5u16.to_le_bytes());
        bytes.extend_from_slice(&7u16.to_le_bytes());
        bytes.push(1);
        bytes.push(128);
        let (h, events) = read_stream(&bytes).unwrap();
        assert_eq!(h, StreamHeader::DEFAULT);
        assert_eq!(events, vec![ev(1000, 5, 7, true, 128)]);
    }

    #[test]
    fn three_event_round_trip_is_field_identical() {
        let h = StreamHeader::new(64, 48).unwrap();
        let events = vec![
            ev(10, 0, 0, false, 0),
            ev(10, 63, 47, true, 255),
            ev(9000, 5, 7, true, 128),
        ];
        let bytes = write_stream(&h, &events).unwrap();
        assert_eq!(read_stream(&bytes).unwrap(), (h, events));
    }

    #[test]
    fn x_at_width_is_rejected_on_write() {
        let h = StreamHeader::DEFAULT;
        let err = write_stream(&h, &[ev(0, 1280, 0, true, 0)]).unwrap_err();
        assert!(matches!(err, EventIoError::InvariantViolation(_)), "{err}");
    }

    #[test]
    fn bad_magic_is_rejected() {
        assert_eq!(read_stream(b"EVS2\x00\x05\x20\x03"), Err(EventIoError::BadMagic));
        assert_eq!(read_stream(b"EV"), Err(EventIoError::BadMagic));
    }

    #[test]
    fn partial_trailing_record_is_rejected() {
        let h = StreamHeader::DEFAULT;
        let mut bytes = write_stream(&h, &[ev(0, 1, 1, true, 9)]).unwrap();
        bytes.pop();
        let err = read_stream(&bytes).unwrap_err();
        assert!(matches!(err, EventIoError::TruncatedRecord { .. }), "{err}");
    }

    #[test]
    fn timestamp_regression_is_an_error_not_a_reorder() {
        let h = StreamHeader::DEFAULT;
        let mut bytes = write_stream(&h, &[ev(100, 1, 1, true, 0)]).unwrap();
        let more = write_stream(&h, &[ev(50, 1, 1, true, 0)]).unwrap();
        bytes.extend_from_slice(&more[EVS1_HEADER_LEN..]);
        let err = read_stream(&bytes).unwrap_err();
        assert_eq!(
            err,
            EventIoError::TimestampRegression {
                index: 1,
                prev: 100,
                t: 50
            }
        );
    }

    #[test]
    fn out_of_range_coordinate_is_reported_on_read() {
        // encode against a wide header, then shrink the header bytes
        let mut bytes = write_stream(&StreamHeader::DEFAULT, &[ev(0, 100, 3, true, 0)]).unwrap();
        bytes[4..6].copy_from_slice(&10u16.to_le_bytes());
        let err = read_stream(&bytes).unwrap_err();
        assert!(matches!(err, EventIoError::CoordOutOfRange { x: 100, .. }), "{err}");
    }

    #[test]
    fn csv_line_maps_fields_directly() {
        let h = StreamHeader::DEFAULT;
        let text = format!("{CSV_HEADER}\n1000,5,7,1,128\n");
        let events = read_csv_events(text.as_bytes(), &h).unwrap();
        assert_eq!(events, vec![ev(1000, 5, 7, true, 128)]);
    }

    #[test]
    fn csv_header_only_yields_empty_sequence() {
        let h = StreamHeader::DEFAULT;
        let text = format!("{CSV_HEADER}\n");
        assert!(read_csv_events(text.as_bytes(), &h).unwrap().is_empty());
    }

    #[test]
    fn csv_parse_failures_carry_line_numbers() {
        let h = StreamHeader::DEFAULT;
        let text = format!("{CSV_HEADER}\n1,1,1,1,1\n2,3,4\n");
        match read_csv_events(text.as_bytes(), &h) {
            Err(EventIoError::CsvParse { line: 3, .. }) => {}
            other => panic!("expected CsvParse at line 3, got {other:?}"),
        }
        let text = format!("{CSV_HEADER}\n1,1,1,2,1\n");
        match read_csv_events(text.as_bytes(), &h) {
            Err(EventIoError::CsvParse { line: 2, msg }) => assert!(msg.contains("polarity")),
            other => panic!("expected polarity CsvParse, got {other:?}"),
        }
    }

    #[test]
    fn csv_to_evs1_to_csv_is_byte_identical() {
        let h = StreamHeader::new(200, 100).unwrap();
        let events: Vec<Event> = (0..100)
            .map(|i| ev(i * 37, (i % 200) as u16, (i % 100) as u16, i % 3 == 0, (i % 256) as u8))
            .collect();
        let mut csv1 = Vec::new();
        write_csv_events(&mut csv1, &events).unwrap();
        let parsed = read_csv_events(csv1.as_slice(), &h).unwrap();
        let bytes = write_stream(&h, &parsed).unwrap();
        let (_, back) = read_stream(&bytes).unwrap();
        let mut csv2 = Vec::new();
        write_csv_events(&mut csv2, &back).unwrap();
        assert_eq!(csv1, csv2);
    }

    prop_compose! {
        fn arb_events(max_len: usize)(len in 0..max_len)(
            ts in proptest::collection::vec(0u64..1_000_000, len),
            xs in proptest::collection::vec(0u16..320, len),
            ys in proptest::collection::vec(0u16..200, len),
            ps in proptest::collection::vec(proptest::bool::ANY, len),
            gs in proptest::collection::vec(proptest::num::u8::ANY, len),
        ) -> Vec<Event> {
            let mut ts = ts;
            ts.sort_unstable();
            ts.iter().zip(xs).zip(ys).zip(ps).zip(gs)
                .map(|((((t, x), y), p), g)| ev(*t, x, y, p, g))
                .collect()
        }
    }

    proptest! {
        #[test]
        fn evs1_round_trip(events in arb_events(256)) {
            let h = StreamHeader::new(320, 200).unwrap();
            let bytes = write_stream(&h, &events).unwrap();
            prop_assert_eq!(read_stream(&bytes).unwrap(), (h, events));
        }

        #[test]
        fn csv_round_trip(events in arb_events(256)) {
            let h = StreamHeader::new(320, 200).unwrap();
            let mut csv = Vec::new();
            write_csv_events(&mut csv, &events).unwrap();
            prop_assert_eq!(read_csv_events(csv.as_slice(), &h).unwrap(), events);
        }
    }
}
