use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::ValueEnum;
use evframe_core::{
    apply_policy, encode_all, make_chunks, parse_aedat2, parse_text, segment, simulate,
    temporal_average_pool, write_text, AedatLayout, ChunkError, ChunkPolicy, FrameKind,
    IntensityFrame, ParseError, Parsed, Polarity, PolarityMode, ScoreError, SensorGeometry,
    SimConfig, SimError, StreamError, WindowConfig,
};
use thiserror::Error;

use crate::formats::{
    parse_scores, pnm_extension, write_pnm, FormatError, FrameTensor, TensorFrame,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Chunk(#[from] ChunkError),
}

impl CliError {
    /// 1 for bad data, 2 for bad invocation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// `.aedat`/`.dat` files are AEDAT 2.0, everything else is text.
    #[default]
    Auto,
    Aedat,
    Text,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum SensorPreset {
    #[default]
    Dvs128,
    Davis240,
}

impl SensorPreset {
    pub fn layout(self) -> AedatLayout {
        match self {
            SensorPreset::Dvs128 => AedatLayout::DVS128,
            SensorPreset::Davis240 => AedatLayout::DAVIS240,
        }
    }

    pub fn geometry(self) -> SensorGeometry {
        match self {
            SensorPreset::Dvs128 => SensorGeometry::DVS128,
            SensorPreset::Davis240 => SensorGeometry::DAVIS240,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    #[default]
    Timestamp,
    Count,
}

impl From<KindArg> for FrameKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Timestamp => FrameKind::Timestamp,
            KindArg::Count => FrameKind::EventCount,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum PolarityArg {
    #[default]
    Merged,
    Ignore,
}

impl From<PolarityArg> for PolarityMode {
    fn from(p: PolarityArg) -> Self {
        match p {
            PolarityArg::Merged => PolarityMode::Merged,
            PolarityArg::Ignore => PolarityMode::Ignore,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    #[default]
    Keep,
    DropEmpty,
}

impl From<PolicyArg> for ChunkPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Keep => ChunkPolicy::Keep,
            PolicyArg::DropEmpty => ChunkPolicy::DropAllEmpty,
        }
    }
}

/// Where events come from and how to decode them.
#[derive(Clone, Debug, Default)]
pub struct StreamSource {
    pub path: PathBuf,
    pub format: InputFormat,
    pub sensor: SensorPreset,
    /// Overrides the preset's sensor size.
    pub size: Option<(u32, u32)>,
}

impl StreamSource {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            ..Self::default()
        }
    }

    fn geometry(&self) -> Result<SensorGeometry> {
        match self.size {
            Some((w, h)) => SensorGeometry::new(w, h).map_err(|e| CliError::Usage(e.to_string())),
            None => Ok(self.sensor.geometry()),
        }
    }

    fn is_aedat(&self) -> bool {
        match self.format {
            InputFormat::Aedat => true,
            InputFormat::Text => false,
            InputFormat::Auto => matches!(
                self.path.extension().and_then(|e| e.to_str()),
                Some("aedat" | "dat")
            ),
        }
    }

    pub fn load(&self) -> Result<Parsed> {
        let geometry = self.geometry()?;
        let bytes = read(&self.path)?;
        let parsed = if self.is_aedat() {
            parse_aedat2(&bytes, &self.sensor.layout(), geometry)
        } else {
            match std::str::from_utf8(&bytes) {
                Ok(text) => parse_text(text, geometry),
                Err(e) => Err(ParseError::Line {
                    line: bytes[..e.valid_up_to()]
                        .iter()
                        .filter(|&&b| b == b'\n')
                        .count()
                        + 1,
                    reason: "not valid UTF-8".into(),
                }),
            }
        };
        parsed.map_err(|source| CliError::Parse {
            path: self.path.clone(),
            source,
        })
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, data: &[u8]) -> Result<()> {
    fs::write(path, data).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_tensor(path: &Path) -> Result<FrameTensor> {
    FrameTensor::from_bytes(&read(path)?).map_err(|source| CliError::Format {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Clone, Debug)]
pub struct EncodeOptions {
    pub source: StreamSource,
    pub window_us: u64,
    pub kind: KindArg,
    pub polarity: PolarityArg,
    pub output: PathBuf,
    pub emit_images: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl EncodeOptions {
    pub fn new(source: StreamSource, output: impl Into<PathBuf>) -> Self {
        Self {
            source,
            window_us: evframe_core::DEFAULT_WINDOW_US,
            kind: KindArg::default(),
            polarity: PolarityArg::default(),
            output: output.into(),
            emit_images: None,
            threads: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodeSummary {
    pub events: usize,
    pub frames: usize,
    pub elapsed: Duration,
}

impl EncodeSummary {
    pub fn events_per_second(&self) -> f64 {
        self.events as f64 / self.elapsed.as_secs_f64().max(1e-9)
    }
}

/// Parse -> window -> encode -> write a frame tensor (and optionally images).
pub fn cmd_encode(opts: &EncodeOptions) -> Result<EncodeSummary> {
    let started = Instant::now();
    let config = WindowConfig::new(opts.window_us)
        .ok_or_else(|| CliError::Usage("--window-us must be positive".into()))?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = opts.threads {
            if n == 0 {
                return Err(CliError::Usage("--threads must be positive".into()));
            }
            b = b.num_threads(n);
        }
        b.build().map_err(|e| CliError::Usage(e.to_string()))?
    };

    let parsed = opts.source.load()?;
    let stream = parsed.stream;
    let geometry = stream.geometry();
    let mode: PolarityMode = opts.polarity.into();
    let kind: FrameKind = opts.kind.into();

    let windows = segment(&stream, config);
    let frames = pool.install(|| encode_all(&windows, kind, mode));
    let tensor = FrameTensor::from_encoded(
        geometry.width() as u32,
        geometry.height() as u32,
        mode.channels() as u32,
        &frames,
    );
    let bytes = tensor.to_bytes().map_err(|source| CliError::Format {
        path: opts.output.clone(),
        source,
    })?;
    write(&opts.output, &bytes)?;

    if let Some(dir) = &opts.emit_images {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
        let ext = pnm_extension(mode.channels());
        for (i, f) in frames.iter().enumerate() {
            let image = write_pnm(f.width, f.height, f.channels, &f.pixels)
                .expect("encoder emits 1 or 3 channels");
            write(&dir.join(format!("frame_{i:06}.{ext}")), &image)?;
        }
    }

    Ok(EncodeSummary {
        events: stream.len(),
        frames: frames.len(),
        elapsed: started.elapsed(),
    })
}

/// One line per chunk: the source indices of its frames, oldest first.
pub fn chunk_manifest(tensor: &FrameTensor, policy: ChunkPolicy) -> Result<String> {
    let chunks = apply_policy(make_chunks(&tensor.frames)?, policy);
    let mut out = String::new();
    for c in &chunks {
        let line: Vec<String> = c.frame_indices().map(|i| i.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out)
}

pub fn cmd_chunk(frames: &Path, policy: PolicyArg) -> Result<String> {
    chunk_manifest(&read_tensor(frames)?, policy.into())
}

pub fn cmd_aggregate(scores: &Path) -> Result<String> {
    let text = String::from_utf8(read(scores)?).map_err(|_| CliError::Format {
        path: scores.to_path_buf(),
        source: FormatError::Score {
            line: 0,
            reason: "not valid UTF-8".into(),
        },
    })?;
    let file = parse_scores(&text).map_err(|source| CliError::Format {
        path: scores.to_path_buf(),
        source,
    })?;
    let prediction = temporal_average_pool(&file.vectors)?.with_class_names(&file.class_names);
    let mean: Vec<String> = prediction
        .mean_scores
        .iter()
        .map(|v| v.to_string())
        .collect();
    let mut out = format!("mean: {}\nlabel: {}", mean.join(","), prediction.label);
    if let Some(name) = prediction.label_name {
        let _ = write!(out, " {name}");
    }
    out.push('\n');
    Ok(out)
}

/// Intensity of an 8-bit pixel value; never zero.
pub fn intensity_of(v: u8) -> f64 {
    1.0 + v as f64
}

pub fn intensity_frames(tensor: &FrameTensor) -> Result<Vec<IntensityFrame>> {
    if tensor.channels != 1 {
        return Err(CliError::Usage(format!(
            "intensity input must have 1 channel, found {}",
            tensor.channels
        )));
    }
    tensor
        .frames
        .iter()
        .map(|f: &TensorFrame| {
            IntensityFrame::new(
                tensor.width as usize,
                tensor.height as usize,
                f.pixels.iter().copied().map(intensity_of).collect(),
                f.window_start,
            )
            .map_err(CliError::from)
        })
        .collect()
}

pub fn cmd_simulate(
    input: &Path,
    threshold: f64,
    refractory_us: u64,
    output: &Path,
) -> Result<usize> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(CliError::Usage("--threshold must be positive".into()));
    }
    let frames = intensity_frames(&read_tensor(input)?)?;
    let config = SimConfig {
        contrast_threshold: threshold,
        refractory_period_us: refractory_us,
    };
    let stream = simulate(&frames, &config)?;
    write(output, write_text(&stream).as_bytes())?;
    Ok(stream.len())
}

pub fn cmd_truncate(source: &StreamSource, ratio: f64, output: &Path) -> Result<usize> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(CliError::Usage(format!(
            "--ratio must lie in (0, 1], got {ratio}"
        )));
    }
    let stream = source.load()?.stream;
    let truncated = stream.truncate_by_ratio(ratio)?;
    write(output, write_text(&truncated).as_bytes())?;
    Ok(truncated.len())
}

pub fn cmd_info(source: &StreamSource) -> Result<String> {
    let Parsed { stream, stats } = source.load()?;
    let on = stream
        .events()
        .iter()
        .filter(|e| e.p == Polarity::On)
        .count();
    let duration = match (stream.first_timestamp(), stream.last_timestamp()) {
        (Some(a), Some(b)) => b - a,
        _ => 0,
    };
    let mut out = String::new();
    let _ = writeln!(out, "events: {}", stream.len());
    let _ = writeln!(out, "duration_us: {duration}");
    let _ = writeln!(out, "on_events: {on}");
    let _ = writeln!(out, "off_events: {}", stream.len() - on);
    let _ = writeln!(out, "geometry: {}", stream.geometry());
    if let (Some(a), Some(b)) = (stream.first_timestamp(), stream.last_timestamp()) {
        let _ = writeln!(out, "first_t: {a}");
        let _ = writeln!(out, "last_t: {b}");
    }
    let _ = writeln!(out, "records: {}", stats.records);
    let _ = writeln!(out, "header_lines: {}", stats.header_lines);
    let _ = writeln!(out, "comment_lines: {}", stats.comment_lines);
    let _ = writeln!(out, "skipped_non_dvs: {}", stats.skipped_non_dvs);
    let _ = writeln!(out, "timestamp_wraps: {}", stats.timestamp_wraps);
    Ok(out)
}
