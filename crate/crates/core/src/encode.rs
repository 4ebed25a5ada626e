//! Frame representations of an event window.
//!
//! * Timestamp image: each active pixel holds the relative time of its most
//!   recent event, `(t_n - t_begin) / (t_end - t_begin)`, where `t_begin` and
//!   `t_end` are the earliest and latest timestamps of the whole window.
//! * Event image: each pixel holds its event count (a 2D histogram).
//!
//! Either representation can be rendered with polarities pooled into a
//! single channel ([`PolarityMode::Ignore`]) or split into ON and OFF planes
//! stacked as channels 0 and 1 of an RGB-like frame ([`PolarityMode::Merged`]).
//! Channel 2 of a merged frame is always zero.
//!
//! Quantization to 8 bits is `round(255 * v / v_max)`. For timestamp frames
//! `v_max` is 1; for count frames it is the largest count over all channels
//! of the frame. Both are evaluated in exact integer arithmetic, so rounding
//! at exact halves is always upward.

use rayon::prelude::*;

use crate::events::{Event, Polarity};
use crate::window::EventWindow;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FrameKind {
    Timestamp,
    EventCount,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PolarityMode {
    /// One channel, both polarities pooled.
    Ignore,
    /// Three channels: ON, OFF, zero.
    Merged,
}

impl PolarityMode {
    pub fn channels(self) -> usize {
        match self {
            PolarityMode::Ignore => 1,
            PolarityMode::Merged => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PolarityFilter {
    On,
    Off,
    Both,
}

impl PolarityFilter {
    #[inline]
    pub fn accepts(self, p: Polarity) -> bool {
        match self {
            PolarityFilter::On => p == Polarity::On,
            PolarityFilter::Off => p == Polarity::Off,
            PolarityFilter::Both => true,
        }
    }
}

/// Unquantized per-pixel values, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedFrame {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Row-major, channel-interleaved.
    pub pixels: Vec<u8>,
    pub kind: FrameKind,
    pub polarity_mode: PolarityMode,
    pub window_start: u64,
    pub window_end: u64,
    pub empty: bool,
}

impl EncodedFrame {
    pub fn pixel(&self, x: usize, y: usize, channel: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels + channel]
    }

    /// Copies one channel out as a row-major plane.
    pub fn channel(&self, channel: usize) -> Vec<u8> {
        self.pixels
            .iter()
            .skip(channel)
            .step_by(self.channels)
            .copied()
            .collect()
    }
}

/// Per-pixel offset of the latest accepted event from `t_begin`, plus one;
/// zero marks an inactive pixel.
fn latest_offsets(events: &[Event], window: &EventWindow, filter: PolarityFilter) -> Vec<u64> {
    let geometry = window.geometry();
    let mut latest = vec![0u64; geometry.pixel_count()];
    let Some(t_begin) = window.t_begin() else {
        return latest;
    };
    for e in events.iter().filter(|e| filter.accepts(e.p)) {
        // Events are time-sorted, so the last write per pixel is its latest event.
        latest[geometry.index(e.x, e.y)] = e.t - t_begin + 1;
    }
    latest
}

fn counts(events: &[Event], window: &EventWindow, filter: PolarityFilter) -> Vec<u32> {
    let geometry = window.geometry();
    let mut counts = vec![0u32; geometry.pixel_count()];
    for e in events.iter().filter(|e| filter.accepts(e.p)) {
        counts[geometry.index(e.x, e.y)] += 1;
    }
    counts
}

/// Span `t_end - t_begin` of the window; 0 when empty.
fn duration(window: &EventWindow) -> u64 {
    match (window.t_begin(), window.t_end()) {
        (Some(b), Some(e)) => e - b,
        _ => 0,
    }
}

/// Timestamp image of `window` restricted to `filter`'s polarity. The
/// normalization span always covers every event in the window. When all
/// events share one timestamp, active pixels are 1.
pub fn timestamp_field(window: &EventWindow, filter: PolarityFilter) -> ScalarField {
    let geometry = window.geometry();
    let span = duration(window);
    let values = latest_offsets(window.events(), window, filter)
        .into_iter()
        .map(|o| match o {
            0 => 0.0,
            _ if span == 0 => 1.0,
            o => (o - 1) as f64 / span as f64,
        })
        .collect();
    ScalarField {
        width: geometry.width(),
        height: geometry.height(),
        values,
    }
}

/// Event image: number of `filter`-accepted events per pixel.
pub fn event_count_field(window: &EventWindow, filter: PolarityFilter) -> ScalarField {
    let geometry = window.geometry();
    ScalarField {
        width: geometry.width(),
        height: geometry.height(),
        values: counts(window.events(), window, filter)
            .into_iter()
            .map(f64::from)
            .collect(),
    }
}

#[inline]
fn quantize_ratio(num: u64, den: u64) -> u8 {
    // round(255 * num / den) with halves rounded up; num <= den.
    ((510 * num as u128 + den as u128) / (2 * den as u128)) as u8
}

fn quantize_timestamps(offsets: &[u64], span: u64) -> impl Iterator<Item = u8> + '_ {
    offsets.iter().map(move |&o| match o {
        0 => 0,
        _ if span == 0 => 255,
        o => quantize_ratio(o - 1, span),
    })
}

fn quantize_counts(counts: &[u32], max: u32) -> impl Iterator<Item = u8> + '_ {
    counts.iter().map(move |&c| match max {
        0 => 0,
        m => quantize_ratio(c as u64, m as u64),
    })
}

/// Renders `window` as an 8-bit frame.
pub fn encode(window: &EventWindow, kind: FrameKind, mode: PolarityMode) -> EncodedFrame {
    let geometry = window.geometry();
    let channels = mode.channels();
    let n = geometry.pixel_count();
    let mut pixels = vec![0u8; n * channels];
    let events = window.events();

    match (kind, mode) {
        (FrameKind::Timestamp, PolarityMode::Ignore) => {
            let latest = latest_offsets(events, window, PolarityFilter::Both);
            for (px, q) in pixels
                .iter_mut()
                .zip(quantize_timestamps(&latest, duration(window)))
            {
                *px = q;
            }
        }
        (FrameKind::EventCount, PolarityMode::Ignore) => {
            let c = counts(events, window, PolarityFilter::Both);
            let max = c.iter().copied().max().unwrap_or(0);
            for (px, q) in pixels.iter_mut().zip(quantize_counts(&c, max)) {
                *px = q;
            }
        }
        (FrameKind::Timestamp, PolarityMode::Merged) => {
            let span = duration(window);
            let on = latest_offsets(events, window, PolarityFilter::On);
            let off = latest_offsets(events, window, PolarityFilter::Off);
            let chunks = pixels.chunks_exact_mut(3);
            for ((px, a), b) in chunks
                .zip(quantize_timestamps(&on, span))
                .zip(quantize_timestamps(&off, span))
            {
                px[0] = a;
                px[1] = b;
            }
        }
        (FrameKind::EventCount, PolarityMode::Merged) => {
            let on = counts(events, window, PolarityFilter::On);
            let off = counts(events, window, PolarityFilter::Off);
            let max = on.iter().chain(off.iter()).copied().max().unwrap_or(0);
            let chunks = pixels.chunks_exact_mut(3);
            for ((px, a), b) in chunks
                .zip(quantize_counts(&on, max))
                .zip(quantize_counts(&off, max))
            {
                px[0] = a;
                px[1] = b;
            }
        }
    }

    EncodedFrame {
        width: geometry.width(),
        height: geometry.height(),
        channels,
        pixels,
        kind,
        polarity_mode: mode,
        window_start: window.window_start(),
        window_end: window.window_end(),
        empty: window.is_empty(),
    }
}

/// ON/OFF-separated frame: channel 0 from ON events, channel 1 from OFF
/// events, channel 2 zero, jointly rescaled to 0..=255.
pub fn encode_merged(window: &EventWindow, kind: FrameKind) -> EncodedFrame {
    encode(window, kind, PolarityMode::Merged)
}

/// Single-channel frame over both polarities.
pub fn encode_single(window: &EventWindow, kind: FrameKind) -> EncodedFrame {
    encode(window, kind, PolarityMode::Ignore)
}

/// Encodes every window on the current rayon pool. Output order follows
/// `windows` regardless of scheduling.
pub fn encode_all(
    windows: &[EventWindow],
    kind: FrameKind,
    mode: PolarityMode,
) -> Vec<EncodedFrame> {
    windows.par_iter().map(|w| encode(w, kind, mode)).collect()
}
