//! Encoder front end: a kernel bank paired with its encoder settings.

use crate::decoder::{reconstruct_from_codes, reconstruct_from_events};
use crate::error::Result;
use crate::itp::{calibrate_levels, encode_to_events, EventStream, ItpOutput, LevelTable, LEVELS_PER_KERNEL};
use crate::kernel_bank::{build_bank, KernelBank};
use crate::mp::{encode_stream, EncodedStream, EncoderConfig};

#[derive(Debug, Clone)]
pub struct Spiketrum {
    bank: KernelBank,
    config: EncoderConfig,
}

impl Spiketrum {
    pub fn new(config: EncoderConfig) -> Result<Self> {
        config.validate()?;
        let bank = build_bank(&config.bank)?;
        config.validate_for(&bank)?;
        Ok(Spiketrum { bank, config })
    }

    pub fn bank(&self) -> &KernelBank {
        &self.bank
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    /// `3 * M` output channels.
    pub fn n_channels(&self) -> u32 {
        (LEVELS_PER_KERNEL * self.bank.len()) as u32
    }

    pub fn encode(&self, signal: &[f64]) -> Result<EncodedStream> {
        encode_stream(signal, &self.bank, &self.config)
    }

    pub fn calibrate<'a>(&self, encoded: impl IntoIterator<Item = &'a EncodedStream>) -> Result<LevelTable> {
        calibrate_levels(encoded.into_iter().flat_map(|e| e.codes()), self.bank.len())
    }

    pub fn to_events(&self, encoded: &EncodedStream, table: &LevelTable) -> Result<ItpOutput> {
        encode_to_events(encoded, table)
    }

    pub fn reconstruct(&self, encoded: &EncodedStream) -> Result<Vec<f64>> {
        reconstruct_from_codes(encoded.codes(), &self.bank, self.config.segment_len, encoded.duration())
    }

    pub fn reconstruct_events(&self, stream: &EventStream, table: &LevelTable) -> Result<Vec<f64>> {
        reconstruct_from_events(stream, &self.bank, table)
    }
}
