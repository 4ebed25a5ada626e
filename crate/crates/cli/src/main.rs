use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evframe_cli::commands::{
    self, CliError, EncodeOptions, InputFormat, KindArg, PolarityArg, PolicyArg, SensorPreset,
    StreamSource,
};

/// Event-camera stream to frame pipeline.
#[derive(Parser)]
#[command(name = "evframe", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InputArgs {
    /// Event stream (AEDAT 2.0 or text).
    input: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    format: InputFormat,
    /// Address layout and default sensor size.
    #[arg(long, value_enum, default_value_t)]
    layout: SensorPreset,
    /// Sensor width, overriding the layout's.
    #[arg(long, requires = "height")]
    width: Option<u32>,
    /// Sensor height, overriding the layout's.
    #[arg(long, requires = "width")]
    height: Option<u32>,
}

impl InputArgs {
    fn source(&self) -> StreamSource {
        StreamSource {
            path: self.input.clone(),
            format: self.format,
            sensor: self.layout,
            size: self.width.zip(self.height),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render an event stream into a frame tensor file.
    Encode {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = evframe_core::DEFAULT_WINDOW_US)]
        window_us: u64,
        #[arg(long, value_enum, default_value_t)]
        kind: KindArg,
        #[arg(long, value_enum, default_value_t)]
        polarity: PolarityArg,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write one PGM/PPM image per frame into this directory.
        #[arg(long)]
        emit_images: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List the 3-frame chunks of a frame tensor file.
    Chunk {
        frames: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        policy: PolicyArg,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Average per-chunk class scores into a video-level label.
    Aggregate { scores: PathBuf },
    /// Generate events from an 8-bit intensity frame tensor.
    Simulate {
        input: PathBuf,
        #[arg(long)]
        threshold: f64,
        #[arg(long, default_value_t = 0)]
        refractory_us: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Keep the leading fraction of a recording's duration.
    Truncate {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        ratio: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print stream statistics.
    Info {
        #[command(flatten)]
        input: InputArgs,
    },
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Encode {
            input,
            window_us,
            kind,
            polarity,
            output,
            emit_images,
            threads,
        } => {
            let opts = EncodeOptions {
                source: input.source(),
                window_us,
                kind,
                polarity,
                output,
                emit_images,
                threads,
            };
            let s = commands::cmd_encode(&opts)?;
            Ok(format!(
                "encoded {} events into {} frames ({:.0} events/s)\n",
                s.events,
                s.frames,
                s.events_per_second()
            ))
        }
        Command::Chunk {
            frames,
            policy,
            output,
        } => {
            let manifest = commands::cmd_chunk(&frames, policy)?;
            match output {
                Some(path) => std::fs::write(&path, manifest)
                    .map(|_| String::new())
                    .map_err(|source| CliError::Io { path, source }),
                None => Ok(manifest),
            }
        }
        Command::Aggregate { scores } => commands::cmd_aggregate(&scores),
        Command::Simulate {
            input,
            threshold,
            refractory_us,
            output,
        } => {
            let n = commands::cmd_simulate(&input, threshold, refractory_us, &output)?;
            Ok(format!("simulated {n} events\n"))
        }
        Command::Truncate {
            input,
            ratio,
            output,
        } => {
            let n = commands::cmd_truncate(&input.source(), ratio, &output)?;
            Ok(format!("kept {n} events\n"))
        }
        Command::Info { input } => commands::cmd_info(&input.source()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            let _ = std::io::stdout().write_all(out.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
