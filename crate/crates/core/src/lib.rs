//! Event-camera preprocessing: parse recorded event streams, cut them into
//! fixed-length time windows, render each window as a timestamp image or an
//! event-count image, group frames into sliding three-frame chunks, and pool
//! per-chunk classifier scores into a video-level label. A simple DVS pixel
//! model turns intensity video into events for end-to-end testing.

pub mod chunk;
pub mod encode;
pub mod events;
pub mod ingest;
pub mod score;
pub mod sim;
pub mod window;

pub use chunk::{
    apply_policy, make_chunks, Chunk, ChunkConfig, ChunkError, ChunkFrame, ChunkPolicy,
};
pub use encode::{
    encode, encode_all, encode_merged, encode_single, event_count_field, timestamp_field,
    EncodedFrame, FrameKind, PolarityFilter, PolarityMode, ScalarField,
};
pub use events::{
    truncate_by_ratio, validate_stream, Event, EventStream, Polarity, SensorGeometry, StreamError,
    Violation, ViolationKind,
};
pub use ingest::{
    parse_aedat2, parse_text, write_aedat2, write_text, AedatLayout, ParseError, ParseStats, Parsed,
};
pub use score::{temporal_average_pool, ScoreError, ScoreVector, VideoPrediction};
pub use sim::{simulate, IntensityFrame, SimConfig, SimError};
pub use window::{segment, EventWindow, WindowConfig, DEFAULT_WINDOW_US};
