//! Fixed-length time windows, one per output frame.
//!
//! Windows tile the stream without overlap, anchored at the first event:
//! window `k` covers `[t_first + k*T, t_first + (k+1)*T)`. Interior windows
//! that receive no events are still emitted so the frame cadence stays
//! regular.

use crate::events::{Event, EventStream, SensorGeometry};

/// Default window length (80 ms).
pub const DEFAULT_WINDOW_US: u64 = 80_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowConfig {
    window_length_us: u64,
}

impl WindowConfig {
    /// Returns `None` for a zero-length window.
    pub fn new(window_length_us: u64) -> Option<Self> {
        (window_length_us > 0).then_some(Self { window_length_us })
    }

    pub fn window_length_us(&self) -> u64 {
        self.window_length_us
    }
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_length_us: DEFAULT_WINDOW_US,
        }
    }
}

/// Events falling in one half-open interval `[window_start, window_end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EventWindow<'a> {
    events: &'a [Event],
    window_start: u64,
    window_end: u64,
    geometry: SensorGeometry,
}

impl<'a> EventWindow<'a> {
    /// Wraps a time-sorted slice whose timestamps all lie in `[start, end)`.
    pub fn new(
        events: &'a [Event],
        window_start: u64,
        window_end: u64,
        geometry: SensorGeometry,
    ) -> Self {
        debug_assert!(events
            .iter()
            .all(|e| e.t >= window_start && e.t < window_end));
        Self {
            events,
            window_start,
            window_end,
            geometry,
        }
    }

    pub fn events(&self) -> &'a [Event] {
        self.events
    }

    pub fn window_start(&self) -> u64 {
        self.window_start
    }

    pub fn window_end(&self) -> u64 {
        self.window_end
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Earliest event timestamp over all pixels; `None` for an empty window.
    pub fn t_begin(&self) -> Option<u64> {
        self.events.first().map(|e| e.t)
    }

    /// Latest event timestamp over all pixels; `None` for an empty window.
    pub fn t_end(&self) -> Option<u64> {
        self.events.last().map(|e| e.t)
    }
}

/// Splits `stream` into consecutive windows of `config` length.
pub fn segment<'a>(stream: &'a EventStream, config: WindowConfig) -> Vec<EventWindow<'a>> {
    let events = stream.events();
    let geometry = stream.geometry();
    let (first, last) = match (events.first(), events.last()) {
        (Some(f), Some(l)) => (f.t, l.t),
        _ => return Vec::new(),
    };
    let len = config.window_length_us;
    let count = ((last - first) / len + 1) as usize;
    let mut windows = Vec::with_capacity(count);
    let mut rest = events;
    for k in 0..count as u64 {
        let start = first + k * len;
        let end = start.saturating_add(len);
        let split = if k + 1 == count as u64 {
            rest.len()
        } else {
            rest.partition_point(|e| e.t < end)
        };
        let (inside, tail) = rest.split_at(split);
        windows.push(EventWindow::new(inside, start, end, geometry));
        rest = tail;
    }
    windows
}
