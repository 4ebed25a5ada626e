//! Event data model shared by every stage of the pipeline.
//!
//! An [`EventStream`] is a finite, time-ordered sequence of [`Event`]s
//! recorded on a sensor of known [`SensorGeometry`]. Streams are plain
//! values: nothing in this crate mutates one in place.

use std::fmt;

use thiserror::Error;

/// Sign of the log-intensity change that triggered an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(i8)]
pub enum Polarity {
    /// Darker (-1).
    Off = -1,
    /// Brighter (+1).
    On = 1,
}

impl Polarity {
    pub fn from_sign(sign: i64) -> Option<Self> {
        match sign {
            1 => Some(Polarity::On),
            -1 => Some(Polarity::Off),
            _ => None,
        }
    }

    pub fn as_i8(self) -> i8 {
        self as i8
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarity::On => Polarity::Off,
            Polarity::Off => Polarity::On,
        }
    }
}

/// One sensor spike at pixel `(x, y)` and time `t` (microseconds).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub t: u64,
    pub p: Polarity,
}

impl Event {
    pub fn new(x: u16, y: u16, t: u64, p: Polarity) -> Self {
        Self { x, y, t, p }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SensorGeometry {
    width: u16,
    height: u16,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("sensor geometry must be at least 1x1, got {width}x{height}")]
pub struct GeometryError {
    pub width: u32,
    pub height: u32,
}

impl SensorGeometry {
    /// iniVation DVS-128.
    pub const DVS128: SensorGeometry = SensorGeometry {
        width: 128,
        height: 128,
    };
    /// iniVation DAViS240C.
    pub const DAVIS240: SensorGeometry = SensorGeometry {
        width: 240,
        height: 180,
    };

    pub fn new(width: u32, height: u32) -> Result<Self, GeometryError> {
        let err = GeometryError { width, height };
        if width == 0 || height == 0 {
            return Err(err);
        }
        let width = u16::try_from(width).map_err(|_| err)?;
        let height = u16::try_from(height).map_err(|_| GeometryError {
            width: width as u32,
            height,
        })?;
        Ok(Self { width, height })
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    pub fn height(&self) -> usize {
        self.height as usize
    }

    pub fn pixel_count(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, x: u16, y: u16) -> bool {
        x < self.width && y < self.height
    }

    /// Row-major pixel index; caller guarantees the coordinate is in bounds.
    #[inline]
    pub fn index(&self, x: u16, y: u16) -> usize {
        y as usize * self.width as usize + x as usize
    }
}

impl fmt::Display for SensorGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// A problem found by [`validate_stream`], tied to the offending event.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    OutOfBounds { x: u16, y: u16 },
    NonMonotoneTimestamp { previous: u64, current: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::OutOfBounds { x, y } => {
                write!(
                    f,
                    "event {}: coordinate ({x}, {y}) out of bounds",
                    self.index
                )
            }
            ViolationKind::NonMonotoneTimestamp { previous, current } => write!(
                f,
                "event {}: timestamp {current} precedes previous timestamp {previous}",
                self.index
            ),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum StreamError {
    #[error("cannot truncate empty stream")]
    EmptyStream,
    #[error("observation ratio must lie in (0, 1], got {0}")]
    InvalidRatio(f64),
    #[error("invalid event stream: {0}")]
    Invalid(Violation),
}

/// Time-ordered events recorded on one sensor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventStream {
    geometry: SensorGeometry,
    events: Vec<Event>,
}

impl EventStream {
    /// Builds a stream without checking invariants. Use [`EventStream::try_new`]
    /// or [`validate_stream`] when the events come from an untrusted source.
    pub fn new(geometry: SensorGeometry, events: Vec<Event>) -> Self {
        Self { geometry, events }
    }

    pub fn empty(geometry: SensorGeometry) -> Self {
        Self::new(geometry, Vec::new())
    }

    pub fn try_new(geometry: SensorGeometry, events: Vec<Event>) -> Result<Self, StreamError> {
        let stream = Self::new(geometry, events);
        match validate_stream(&stream).into_iter().next() {
            Some(v) => Err(StreamError::Invalid(v)),
            None => Ok(stream),
        }
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn first_timestamp(&self) -> Option<u64> {
        self.events.first().map(|e| e.t)
    }

    pub fn last_timestamp(&self) -> Option<u64> {
        self.events.last().map(|e| e.t)
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_stream(self)
    }

    pub fn truncate_by_ratio(&self, ratio: f64) -> Result<EventStream, StreamError> {
        truncate_by_ratio(self, ratio)
    }
}

/// Lists every invariant violation in `stream`. An empty result means the
/// stream is valid.
pub fn validate_stream(stream: &EventStream) -> Vec<Violation> {
    let geometry = stream.geometry;
    let mut out = Vec::new();
    let mut previous: Option<u64> = None;
    for (index, e) in stream.events.iter().enumerate() {
        if !geometry.contains(e.x, e.y) {
            out.push(Violation {
                index,
                kind: ViolationKind::OutOfBounds { x: e.x, y: e.y },
            });
        }
        if let Some(prev) = previous {
            if e.t < prev {
                out.push(Violation {
                    index,
                    kind: ViolationKind::NonMonotoneTimestamp {
                        previous: prev,
                        current: e.t,
                    },
                });
            }
        }
        previous = Some(e.t);
    }
    out
}

/// Keeps the leading part of the recording: every event with
/// `t <= t_first + ratio * (t_last - t_first)`.
pub fn truncate_by_ratio(stream: &EventStream, ratio: f64) -> Result<EventStream, StreamError> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(StreamError::InvalidRatio(ratio));
    }
    let (first, last) = match (stream.first_timestamp(), stream.last_timestamp()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(StreamError::EmptyStream),
    };
    let span = last.saturating_sub(first);
    // Integer timestamps: t - first <= ratio * span  <=>  t - first <= floor(ratio * span).
    let offset = ((ratio * span as f64).floor() as u64).min(span);
    let cutoff = first + offset;
    let end = stream.events.partition_point(|e| e.t <= cutoff);
    Ok(EventStream::new(
        stream.geometry,
        stream.events[..end].to_vec(),
    ))
}
