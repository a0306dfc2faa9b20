//! Simplified reference encoders used for benchmarking.
//!
//! * [`spectrogram`]: 40-band log-mel frames quantised by a 50x10
//!   self-organising map, one spike per frame (500 channels).
//! * [`lauscher`]: 700-channel gammatone filterbank, rectification and
//!   power-law compression, then leaky integrate-and-fire units with an
//!   absolute refractory period (700 channels).

pub mod lauscher;
pub mod mel;
pub mod som;
pub mod spectrogram;

pub use lauscher::{lauscher_encode, LauscherConfig, LauscherEncoder, LifState};
pub use mel::{mel_spectrogram, MelConfig};
pub use som::{som_train, SomCodebook, SomConfig};
pub use spectrogram::{spectrogram_encode, SPECTROGRAM_CHANNELS};
