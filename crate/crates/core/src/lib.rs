//! Spike encoding of audio by Gammatone matching pursuit followed by
//! intensity-to-place coding, with decoders, spike-train metrics and two
//! reference encoders.
//!
//! ```no_run
//! use spiketrum::{EncoderConfig, Spiketrum};
//!
//! let encoder = Spiketrum::new(EncoderConfig::new(128, 16_000))?;
//! let signal = spiketrum::io::wav::load_audio("clip.wav".as_ref(), 16_000)?;
//! let codes = encoder.encode(&signal)?;
//! let table = encoder.calibrate([&codes])?;
//! let events = encoder.to_events(&codes, &table)?.stream;
//! println!("{} spikes on {} channels", events.len(), events.n_channels);
//! # Ok::<(), spiketrum::Error>(())
//! ```

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod decoder;
pub mod error;
pub mod io;
pub mod itp;
pub mod kernel_bank;
pub mod metrics;
pub mod mp;
pub mod pipeline;

pub use decoder::{reconstruct_from_codes, reconstruct_from_events, reconstruction_report, ReconstructionReport};
pub use error::{Error, FormatError, Result};
pub use itp::{calibrate_levels, codes_to_events, encode_to_events, EventStream, ItpOutput, LevelTable, SpikeEvent};
pub use kernel_bank::{build_bank, BankParams, KernelBank};
pub use metrics::{compute_metrics, MetricsReport};
pub use mp::{encode_segment, encode_stream, Code, CorrelationMode, EncodedStream, EncoderConfig, Segment};
pub use pipeline::Spiketrum;
