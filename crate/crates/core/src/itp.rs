//! Intensity-to-place coding.
//!
//! Every kernel owns three output channels, each tied to a fixed intensity
//! level. A code fires one spike on the channel whose level is nearest to
//! `|s|`, at the code's sample position. The sign of `s` does not survive
//! this step; only the code path keeps it.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mp::{Code, EncodedStream};

pub const LEVELS_PER_KERNEL: usize = 3;

/// Percentiles of `|s|` used for the three levels.
pub const LEVEL_PERCENTILES: [f64; LEVELS_PER_KERNEL] = [0.25, 0.50, 0.90];

/// Relative spread applied when calibrated levels coincide.
pub const LEVEL_SPREAD: f64 = 1e-6;

/// Per-kernel ascending intensity levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTable {
    levels: Vec<[f64; LEVELS_PER_KERNEL]>,
}

impl LevelTable {
    pub fn new(levels: Vec<[f64; LEVELS_PER_KERNEL]>) -> Result<Self> {
        for (m, l) in levels.iter().enumerate() {
            if !(l[0] > 0.0 && l[0] < l[1] && l[1] < l[2] && l[2].is_finite()) {
                return Err(Error::Calibration(format!(
                    "levels for kernel {m} must be positive and strictly increasing, got {l:?}"
                )));
            }
        }
        Ok(LevelTable { levels })
    }

    pub fn n_kernels(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self, kernel_index: usize) -> Option<&[f64; LEVELS_PER_KERNEL]> {
        self.levels.get(kernel_index)
    }

    pub fn rows(&self) -> &[[f64; LEVELS_PER_KERNEL]] {
        &self.levels
    }

    /// Intensity carried by `channel`.
    pub fn channel_level(&self, channel: usize) -> Option<f64> {
        self.levels
            .get(channel / LEVELS_PER_KERNEL)
            .map(|l| l[channel % LEVELS_PER_KERNEL])
    }
}

/// Linear-interpolation percentile of an ascending slice (`q` in [0, 1]).
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn levels_from(mut mags: Vec<f64>) -> [f64; LEVELS_PER_KERNEL] {
    mags.sort_by(f64::total_cmp);
    let mut l = LEVEL_PERCENTILES.map(|q| percentile(&mags, q));
    if l[0] >= l[1] {
        l[0] = l[1] * (1.0 - LEVEL_SPREAD);
    }
    if l[2] <= l[1] {
        l[2] = l[1] * (1.0 + LEVEL_SPREAD);
    }
    l
}

/// Calibrates per-kernel levels as the 25th/50th/90th percentiles of `|s|`.
///
/// Kernels without observations fall back to percentiles over all codes.
pub fn calibrate_levels<'a>(codes: impl IntoIterator<Item = &'a Code>, m_count: usize) -> Result<LevelTable> {
    let mut per_kernel: Vec<Vec<f64>> = vec![Vec::new(); m_count];
    let mut all = Vec::new();
    for code in codes {
        let slot = per_kernel.get_mut(code.kernel_index).ok_or_else(|| {
            Error::Calibration(format!("kernel index {} outside 0..{m_count}", code.kernel_index))
        })?;
        let mag = code.intensity.abs();
        if !(mag > 0.0 && mag.is_finite()) {
            return Err(Error::Calibration(format!("code intensity {} is not usable", code.intensity)));
        }
        slot.push(mag);
        all.push(mag);
    }
    if all.is_empty() {
        return Err(Error::Calibration("no codes to calibrate from".into()));
    }
    let global = levels_from(all);
    let levels = per_kernel
        .into_iter()
        .map(|mags| if mags.is_empty() { global } else { levels_from(mags) })
        .collect();
    LevelTable::new(levels)
}

/// One spike: `channel = 3 * kernel + level`, `time` in samples from stream origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpikeEvent {
    // Field order gives the (time, channel) sort.
    pub time: u64,
    pub channel: u32,
}

impl SpikeEvent {
    pub fn kernel_index(&self) -> usize {
        self.channel as usize / LEVELS_PER_KERNEL
    }

    pub fn level_index(&self) -> usize {
        self.channel as usize % LEVELS_PER_KERNEL
    }
}

/// Time-sorted spikes over a fixed channel set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventStream {
    pub events: Vec<SpikeEvent>,
    pub n_channels: u32,
    /// Duration in samples.
    pub duration: u64,
    pub sample_rate: u32,
}

impl EventStream {
    /// Sorts `events` by (time, channel) and checks channel bounds.
    pub fn new(mut events: Vec<SpikeEvent>, n_channels: u32, duration: u64, sample_rate: u32) -> Result<Self> {
        if let Some(e) = events.iter().find(|e| e.channel >= n_channels) {
            return Err(crate::error::FormatError::ChannelOutOfRange {
                channel: e.channel,
                n_channels,
            }
            .into());
        }
        events.sort_unstable();
        Ok(EventStream {
            events,
            n_channels,
            duration,
            sample_rate,
        })
    }

    pub fn empty(n_channels: u32, duration: u64, sample_rate: u32) -> Self {
        EventStream {
            events: Vec::new(),
            n_channels,
            duration,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.duration as f64 / f64::from(self.sample_rate)
    }

    /// Spike count per channel.
    pub fn channel_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_channels as usize];
        for e in &self.events {
            counts[e.channel as usize] += 1;
        }
        counts
    }
}

/// Index of the level nearest to `|intensity|`; ties go to the lower level.
pub fn nearest_level(intensity: f64, levels: &[f64; LEVELS_PER_KERNEL]) -> usize {
    let mag = intensity.abs();
    let mut best = 0;
    let mut best_dist = (mag - levels[0]).abs();
    for (j, &l) in levels.iter().enumerate().skip(1) {
        let d = (mag - l).abs();
        if d < best_dist {
            best = j;
            best_dist = d;
        }
    }
    best
}

/// Maps one code to its spike.
pub fn map_code(code: &Code, table: &LevelTable, segment_len: usize) -> Result<SpikeEvent> {
    let levels = table.levels(code.kernel_index).ok_or_else(|| {
        Error::Contract(format!(
            "level table covers {} kernels, code uses kernel {}",
            table.n_kernels(),
            code.kernel_index
        ))
    })?;
    let level = nearest_level(code.intensity, levels);
    Ok(SpikeEvent {
        channel: (LEVELS_PER_KERNEL * code.kernel_index + level) as u32,
        time: code.global_time(segment_len) as u64,
    })
}

/// Spike stream of an encoded signal plus the number of codes lost to
/// channel/time collisions.
#[derive(Debug, Clone, PartialEq)]
pub struct ItpOutput {
    pub stream: EventStream,
    pub collisions: usize,
}

/// Converts codes (in emission order) into a spike stream.
///
/// A code that lands on an already-occupied `(channel, time)` cell is
/// dropped and counted as a collision.
pub fn codes_to_events<'a>(
    codes: impl IntoIterator<Item = &'a Code>,
    table: &LevelTable,
    segment_len: usize,
    duration: u64,
    sample_rate: u32,
) -> Result<ItpOutput> {
    let mut seen = HashSet::new();
    let mut events = Vec::new();
    let mut collisions = 0;
    for code in codes {
        let event = map_code(code, table, segment_len)?;
        if seen.insert(event) {
            events.push(event);
        } else {
            collisions += 1;
        }
    }
    let n_channels = (LEVELS_PER_KERNEL * table.n_kernels()) as u32;
    Ok(ItpOutput {
        stream: EventStream::new(events, n_channels, duration, sample_rate)?,
        collisions,
    })
}

/// [`codes_to_events`] over a whole [`EncodedStream`].
pub fn encode_to_events(encoded: &EncodedStream, table: &LevelTable) -> Result<ItpOutput> {
    codes_to_events(
        encoded.codes(),
        table,
        encoded.segment_len,
        encoded.duration() as u64,
        encoded.sample_rate,
    )
}
