//! On-disk formats used by the command-line pipeline.
//!
//! Frame tensor (`.evfr`), all integers little-endian:
//!
//! ```text
//! "EVFR" | version u8 (=1) | width u32 | height u32 | channels u32 | frame_count u32
//! frame_count x ( window_start u64 | window_end u64 | empty u8 | pixels[width*height*channels] )
//! ```
//!
//! Pixels are row-major and channel-interleaved.
//!
//! Score file: a `#K[,name_0,...,name_{K-1}]` header, then one
//! `chunk_index,s_0,...,s_{K-1}` line per chunk.

use std::fmt::Write as _;

use evframe_core::{ChunkFrame, EncodedFrame, ScoreVector};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"EVFR";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 4 * 4;
const FRAME_META_LEN: usize = 8 + 8 + 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("not a frame tensor file (bad magic)")]
    BadMagic,
    #[error("unsupported frame tensor version {0}")]
    BadVersion(u8),
    #[error("frame tensor truncated: header needs {HEADER_LEN} bytes, file has {0}")]
    ShortHeader(usize),
    #[error("frame tensor size mismatch: header declares {expected} bytes, file has {found}")]
    SizeMismatch { expected: u128, found: usize },
    #[error("frame {frame}: empty flag must be 0 or 1, found {value}")]
    BadEmptyFlag { frame: usize, value: u8 },
    #[error("frame {frame}: expected {expected} pixels, found {found}")]
    PixelCount {
        frame: usize,
        expected: usize,
        found: usize,
    },
    #[error("score file line {line}: {reason}")]
    Score { line: usize, reason: String },
}

/// One stored frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorFrame {
    pub window_start: u64,
    pub window_end: u64,
    pub empty: bool,
    pub pixels: Vec<u8>,
}

impl ChunkFrame for TensorFrame {
    type Key = usize;

    fn compat_key(&self) -> usize {
        self.pixels.len()
    }

    fn is_empty(&self) -> bool {
        self.empty
    }
}

impl From<&EncodedFrame> for TensorFrame {
    fn from(f: &EncodedFrame) -> Self {
        Self {
            window_start: f.window_start,
            window_end: f.window_end,
            empty: f.empty,
            pixels: f.pixels.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameTensor {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub frames: Vec<TensorFrame>,
}

impl FrameTensor {
    pub fn new(width: u32, height: u32, channels: u32) -> Self {
        Self {
            width,
            height,
            channels,
            frames: Vec::new(),
        }
    }

    pub fn from_encoded(width: u32, height: u32, channels: u32, frames: &[EncodedFrame]) -> Self {
        Self {
            width,
            height,
            channels,
            frames: frames.iter().map(TensorFrame::from).collect(),
        }
    }

    pub fn frame_len(&self) -> usize {
        self.width as usize * self.height as usize * self.channels as usize
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, FormatError> {
        let n = self.frame_len();
        let mut out = Vec::with_capacity(HEADER_LEN + self.frames.len() * (FRAME_META_LEN + n));
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.channels.to_le_bytes());
        out.extend_from_slice(&(self.frames.len() as u32).to_le_bytes());
        for (i, f) in self.frames.iter().enumerate() {
            if f.pixels.len() != n {
                return Err(FormatError::PixelCount {
                    frame: i,
                    expected: n,
                    found: f.pixels.len(),
                });
            }
            out.extend_from_slice(&f.window_start.to_le_bytes());
            out.extend_from_slice(&f.window_end.to_le_bytes());
            out.push(f.empty as u8);
            out.extend_from_slice(&f.pixels);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        if bytes.len() < HEADER_LEN {
            if bytes.len() >= 4 && &bytes[..4] != MAGIC {
                return Err(FormatError::BadMagic);
            }
            return Err(FormatError::ShortHeader(bytes.len()));
        }
        if &bytes[..4] != MAGIC {
            return Err(FormatError::BadMagic);
        }
        if bytes[4] != VERSION {
            return Err(FormatError::BadVersion(bytes[4]));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let (width, height, channels, count) = (u32_at(5), u32_at(9), u32_at(13), u32_at(17));
        let frame_len = width as u128 * height as u128 * channels as u128;
        let expected = HEADER_LEN as u128 + count as u128 * (FRAME_META_LEN as u128 + frame_len);
        if expected != bytes.len() as u128 {
            return Err(FormatError::SizeMismatch {
                expected,
                found: bytes.len(),
            });
        }
        let frame_len = frame_len as usize;
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let mut frames = Vec::with_capacity(count as usize);
        let mut pos = HEADER_LEN;
        for frame in 0..count as usize {
            let empty = match bytes[pos + 16] {
                0 => false,
                1 => true,
                value => return Err(FormatError::BadEmptyFlag { frame, value }),
            };
            let data = pos + FRAME_META_LEN;
            frames.push(TensorFrame {
                window_start: u64_at(pos),
                window_end: u64_at(pos + 8),
                empty,
                pixels: bytes[data..data + frame_len].to_vec(),
            });
            pos = data + frame_len;
        }
        Ok(Self {
            width,
            height,
            channels,
            frames,
        })
    }
}

/// Binary PGM (1 channel) or PPM (3 channels).
pub fn write_pnm(width: usize, height: usize, channels: usize, pixels: &[u8]) -> Option<Vec<u8>> {
    let magic = match channels {
        1 => "P5",
        3 => "P6",
        _ => return None,
    };
    if pixels.len() != width * height * channels {
        return None;
    }
    let header = format!("{magic}\n{width} {height}\n255\n");
    let mut out = Vec::with_capacity(header.len() + pixels.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(pixels);
    Some(out)
}

pub fn pnm_extension(channels: usize) -> &'static str {
    if channels == 3 {
        "ppm"
    } else {
        "pgm"
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreFile {
    pub classes: usize,
    pub class_names: Vec<String>,
    pub vectors: Vec<ScoreVector>,
}

pub fn parse_scores(text: &str) -> Result<ScoreFile, FormatError> {
    let err = |line: usize, reason: String| FormatError::Score { line, reason };
    let mut header: Option<(usize, Vec<String>)> = None;
    let mut vectors: Vec<ScoreVector> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if header.is_none() {
                let mut fields = rest.split(',').map(str::trim);
                let k_field = fields.next().unwrap_or("");
                let k: usize = k_field.parse().ok().filter(|&k| k > 0).ok_or_else(|| {
                    err(
                        lineno,
                        format!("header must start with the class count, found {k_field:?}"),
                    )
                })?;
                let names: Vec<String> = fields.map(str::to_string).collect();
                if !names.is_empty() && names.len() != k {
                    return Err(err(
                        lineno,
                        format!("header declares {k} classes but names {}", names.len()),
                    ));
                }
                header = Some((k, names));
            }
            continue;
        }
        let Some((k, _)) = &header else {
            return Err(err(lineno, "score line before the '#' header".into()));
        };
        let mut fields = line.split(',').map(str::trim);
        let idx_field = fields.next().unwrap_or("");
        let chunk_index: usize = idx_field
            .parse()
            .map_err(|_| err(lineno, format!("invalid chunk index {idx_field:?}")))?;
        if let Some(prev) = vectors.last() {
            if chunk_index <= prev.chunk_index {
                return Err(err(
                    lineno,
                    format!(
                        "chunk index {chunk_index} does not follow {}",
                        prev.chunk_index
                    ),
                ));
            }
        }
        let scores = fields
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(lineno, format!("invalid score {f:?}")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if scores.len() != *k {
            return Err(err(
                lineno,
                format!(
                    "chunk {chunk_index}: expected {k} scores, found {}",
                    scores.len()
                ),
            ));
        }
        vectors.push(ScoreVector::new(chunk_index, scores));
    }

    let (classes, class_names) = header.ok_or_else(|| err(0, "missing '#' header".into()))?;
    Ok(ScoreFile {
        classes,
        class_names,
        vectors,
    })
}

pub fn write_scores(file: &ScoreFile) -> String {
    let mut out = format!("#{}", file.classes);
    for name in &file.class_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for v in &file.vectors {
        let _ = write!(out, "{}", v.chunk_index);
        for s in &v.scores {
            let _ = write!(out, ",{s}");
        }
        out.push('\n');
    }
    out
}
