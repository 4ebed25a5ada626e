//! Library side of the `evframe` command-line tool: file formats and the
//! implementation of each subcommand.

pub mod commands;
pub mod formats;

pub use commands::{
    cmd_aggregate, cmd_chunk, cmd_encode, cmd_info, cmd_simulate, cmd_truncate, CliError,
    EncodeOptions, EncodeSummary, StreamSource,
};
pub use formats::{FrameTensor, ScoreFile, TensorFrame};
