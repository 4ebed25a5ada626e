//! Sliding frame buffer: groups consecutive frames into fixed-size chunks,
//! advancing one frame per step. Chunk `j` holds frames `j..j + size`, so
//! each chunk classifies its newest frame together with the two before it.
//! The first `size - 1` frames never end a chunk; no padding is added.

use std::fmt::Debug;

use thiserror::Error;

use crate::encode::{EncodedFrame, FrameKind, PolarityMode};

pub const DEFAULT_CHUNK_SIZE: usize = 3;
pub const DEFAULT_CHUNK_STRIDE: usize = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChunkError {
    #[error("frame {index} does not match frame 0: expected {expected}, found {found}")]
    Mismatch {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("chunk size and stride must be positive")]
    InvalidConfig,
}

/// Anything that can sit in the frame buffer.
pub trait ChunkFrame {
    /// Frames in one chunk must agree on this key.
    type Key: PartialEq + Debug;

    fn compat_key(&self) -> Self::Key;
    fn is_empty(&self) -> bool;
}

impl ChunkFrame for EncodedFrame {
    type Key = (usize, usize, usize, FrameKind, PolarityMode);

    fn compat_key(&self) -> Self::Key {
        (
            self.width,
            self.height,
            self.channels,
            self.kind,
            self.polarity_mode,
        )
    }

    fn is_empty(&self) -> bool {
        self.empty
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChunkConfig {
    pub size: usize,
    pub stride: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self {
            size: DEFAULT_CHUNK_SIZE,
            stride: DEFAULT_CHUNK_STRIDE,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChunkPolicy {
    Keep,
    /// Drop chunks in which every frame came from an empty window.
    DropAllEmpty,
}

/// Consecutive frames, oldest first.
#[derive(Debug, PartialEq, Eq)]
pub struct Chunk<'a, F> {
    frames: &'a [F],
    index: usize,
}

// Manual impls: a chunk only borrows, so F need not be Clone.
impl<F> Clone for Chunk<'_, F> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<F> Copy for Chunk<'_, F> {}

impl<'a, F> Chunk<'a, F> {
    pub fn frames(&self) -> &'a [F] {
        self.frames
    }

    /// Position of the newest frame in the source sequence.
    pub fn index(&self) -> usize {
        self.index
    }

    /// Source positions of the frames, oldest first.
    pub fn frame_indices(&self) -> std::ops::RangeInclusive<usize> {
        (self.index + 1 - self.frames.len())..=self.index
    }
}

impl<F: ChunkFrame> Chunk<'_, F> {
    pub fn all_empty(&self) -> bool {
        self.frames.iter().all(ChunkFrame::is_empty)
    }
}

fn check_compatible<F: ChunkFrame>(frames: &[F]) -> Result<(), ChunkError> {
    let Some(first) = frames.first() else {
        return Ok(());
    };
    let expected = first.compat_key();
    for (index, f) in frames.iter().enumerate().skip(1) {
        let found = f.compat_key();
        if found != expected {
            return Err(ChunkError::Mismatch {
                index,
                expected: format!("{expected:?}"),
                found: format!("{found:?}"),
            });
        }
    }
    Ok(())
}

pub fn make_chunks_with<F: ChunkFrame>(
    frames: &[F],
    config: ChunkConfig,
) -> Result<Vec<Chunk<'_, F>>, ChunkError> {
    if config.size == 0 || config.stride == 0 {
        return Err(ChunkError::InvalidConfig);
    }
    check_compatible(frames)?;
    Ok(frames
        .windows(config.size)
        .enumerate()
        .step_by(config.stride)
        .map(|(start, frames)| Chunk {
            frames,
            index: start + config.size - 1,
        })
        .collect())
}

/// Three-frame chunks with stride one: `N` frames give `max(0, N - 2)` chunks.
pub fn make_chunks<F: ChunkFrame>(frames: &[F]) -> Result<Vec<Chunk<'_, F>>, ChunkError> {
    make_chunks_with(frames, ChunkConfig::default())
}

pub fn apply_policy<'a, F: ChunkFrame>(
    chunks: Vec<Chunk<'a, F>>,
    policy: ChunkPolicy,
) -> Vec<Chunk<'a, F>> {
    match policy {
        ChunkPolicy::Keep => chunks,
        ChunkPolicy::DropAllEmpty => chunks.into_iter().filter(|c| !c.all_empty()).collect(),
    }
}
