use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::itp::{EventStream, SpikeEvent};
use crate::kernel_bank::{build_bank, linear_fft_size, BankParams, KernelBank};

/// Optional bushy-cell layer: one LIF per channel driven by the hair-cell
/// spikes of that channel and its two neighbours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BushyConfig {
    /// Potential jump per incoming hair-cell spike.
    pub weight: f64,
    pub tau_leak: f64,
    pub threshold: f64,
}

impl Default for BushyConfig {
    fn default() -> Self {
        BushyConfig {
            weight: 0.6,
            tau_leak: 0.002,
            threshold: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LauscherConfig {
    pub n_channels: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub order: u32,
    pub max_len: usize,
    /// Exponent of the power-law compression after half-wave rectification.
    pub compression: f64,
    /// Membrane time constant, seconds.
    pub tau_leak: f64,
    /// Absolute refractory period, seconds.
    pub refractory: f64,
    /// Firing rate (Hz) of a full-scale tone at a channel's centre frequency.
    pub target_rate: f64,
    pub bushy: Option<BushyConfig>,
}

impl Default for LauscherConfig {
    fn default() -> Self {
        LauscherConfig {
            n_channels: 700,
            fmin: 100.0,
            fmax: 7400.0,
            order: 4,
            max_len: 512,
            compression: 0.3,
            tau_leak: 0.005,
            refractory: 0.001,
            target_rate: 200.0,
            bushy: None,
        }
    }
}

/// Leaky integrate-and-fire unit with reset-to-zero and absolute refractory period.
#[derive(Debug, Clone, PartialEq)]
pub struct LifState {
    pub potential: f64,
    pub threshold: f64,
    /// Seconds.
    pub tau_leak: f64,
    /// Samples left in the refractory period.
    pub refractory_remaining: usize,
}

impl LifState {
    pub fn new(threshold: f64, tau_leak: f64) -> Self {
        LifState {
            potential: 0.0,
            threshold,
            tau_leak,
            refractory_remaining: 0,
        }
    }

    /// One sample of `v <- decay * v + drive`; returns true on a spike.
    /// Input is ignored while refractory.
    pub fn step(&mut self, decay: f64, drive: f64, refractory_samples: usize) -> bool {
        if self.refractory_remaining > 0 {
            self.refractory_remaining -= 1;
            return false;
        }
        self.potential = decay * self.potential + drive;
        if self.potential >= self.threshold {
            self.potential = 0.0;
            self.refractory_remaining = refractory_samples;
            true
        } else {
            false
        }
    }
}

/// Filterbank plus per-channel thresholds, reusable across signals.
#[derive(Debug, Clone)]
pub struct LauscherEncoder {
    config: LauscherConfig,
    bank: KernelBank,
    thresholds: Vec<f64>,
}

impl LauscherEncoder {
    pub fn new(config: &LauscherConfig, sample_rate: u32) -> Result<Self> {
        if !(config.compression > 0.0 && config.tau_leak > 0.0 && config.refractory >= 0.0 && config.target_rate > 0.0)
        {
            return Err(Error::Config(format!("invalid LIF parameters: {config:?}")));
        }
        let params = BankParams {
            n_kernels: config.n_channels,
            sample_rate,
            fmin: config.fmin,
            fmax: config.fmax,
            order: config.order,
            max_len: config.max_len,
            fft_size: linear_fft_size(3 * config.max_len, config.max_len),
        };
        let bank = build_bank(&params)?;
        let fs = f64::from(sample_rate);
        let decay = (-1.0 / (config.tau_leak * fs)).exp();
        let refractory = (config.refractory * fs).round() as usize;
        let thresholds = bank
            .kernels()
            .iter()
            .map(|k| {
                let omega = 2.0 * PI * k.center_freq / fs;
                let (re, im) = k
                    .support()
                    .iter()
                    .enumerate()
                    .fold((0.0, 0.0), |(re, im), (n, &h)| {
                        (re + h * (omega * n as f64).cos(), im - h * (omega * n as f64).sin())
                    });
                let gain = (re * re + im * im).sqrt();
                calibrate_threshold(gain, omega, decay, refractory, config, fs)
            })
            .collect();
        Ok(LauscherEncoder {
            config: config.clone(),
            bank,
            thresholds,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.bank.len()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn center_freqs(&self) -> Vec<f64> {
        self.bank.kernels().iter().map(|k| k.center_freq).collect()
    }

    pub fn encode(&self, signal: &[f64]) -> EventStream {
        let fs = f64::from(self.bank.sample_rate());
        let decay = (-1.0 / (self.config.tau_leak * fs)).exp();
        let refractory = (self.config.refractory * fs).round() as usize;
        let mut hair_spikes: Vec<Vec<u64>> = vec![Vec::new(); self.bank.len()];

        self.bank.filter_each(signal, |channel, filtered| {
            let mut hair = LifState::new(self.thresholds[channel], self.config.tau_leak);
            for (n, &y) in filtered.iter().enumerate() {
                let drive = (1.0 - decay) * y.max(0.0).powf(self.config.compression);
                if hair.step(decay, drive, refractory) {
                    hair_spikes[channel].push(n as u64);
                }
            }
        });

        let per_channel = match &self.config.bushy {
            None => hair_spikes,
            Some(b) => (0..hair_spikes.len())
                .map(|c| {
                    let lo = c.saturating_sub(1);
                    let hi = (c + 1).min(hair_spikes.len() - 1);
                    let mut inputs: Vec<u64> = hair_spikes[lo..=hi].iter().flatten().copied().collect();
                    inputs.sort_unstable();
                    bushy_spikes(&inputs, b, refractory as u64, fs)
                })
                .collect(),
        };
        let events = per_channel
            .into_iter()
            .enumerate()
            .flat_map(|(c, times)| {
                times.into_iter().map(move |time| SpikeEvent {
                    time,
                    channel: c as u32,
                })
            })
            .collect();
        EventStream::new(events, self.bank.len() as u32, signal.len() as u64, self.bank.sample_rate())
            .expect("channels come from the bank")
    }
}

/// Event-driven LIF over sorted input spike times; simultaneous inputs sum.
fn bushy_spikes(inputs: &[u64], config: &BushyConfig, refractory: u64, fs: f64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut potential = 0.0;
    let mut last = 0u64;
    let mut ready_at = 0u64;
    for group in inputs.chunk_by(|a, b| a == b) {
        let t = group[0];
        if t < ready_at {
            continue;
        }
        potential *= (-((t - last) as f64) / (config.tau_leak * fs)).exp();
        potential += config.weight * group.len() as f64;
        last = t;
        if potential >= config.threshold {
            out.push(t);
            potential = 0.0;
            ready_at = t + refractory + 1;
        }
    }
    out
}

/// Spike count of a LIF driven by a rectified, compressed tone of filter
/// gain `gain`, over `[warmup, len)`.
#[allow(clippy::too_many_arguments)]
fn tone_spikes(threshold: f64, gain: f64, omega: f64, decay: f64, refractory: usize, exponent: f64, warmup: usize, len: usize) -> usize {
    let mut cell = LifState::new(threshold, 0.0);
    let mut count = 0;
    for n in 0..len {
        let y = gain * (omega * n as f64).cos();
        let drive = (1.0 - decay) * y.max(0.0).powf(exponent);
        if cell.step(decay, drive, refractory) && n >= warmup {
            count += 1;
        }
    }
    count
}

/// Bisects the threshold so a unit-amplitude tone at the centre frequency
/// fires at `target_rate`.
fn calibrate_threshold(gain: f64, omega: f64, decay: f64, refractory: usize, config: &LauscherConfig, fs: f64) -> f64 {
    let warmup = (0.05 * fs) as usize;
    let len = warmup + (0.2 * fs) as usize;
    let target = config.target_rate * 0.2;
    let peak = gain.powf(config.compression);
    let (mut lo, mut hi) = (0.0, peak);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let rate = tone_spikes(mid, gain, omega, decay, refractory, config.compression, warmup, len) as f64;
        if rate > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Builds a [`LauscherEncoder`] and encodes one signal.
pub fn lauscher_encode(signal: &[f64], sample_rate: u32, config: &LauscherConfig) -> Result<EventStream> {
    Ok(LauscherEncoder::new(config, sample_rate)?.encode(signal))
}
