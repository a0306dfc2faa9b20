//! Matching pursuit over the gammatone dictionary.
//!
//! Each fixed-length segment is decomposed greedily: correlate the residual
//! with every shifted kernel, pick the cell with the largest magnitude,
//! subtract the scaled atom, repeat `sps` times. Kernels are never placed
//! across a segment boundary, so every segment satisfies
//! `|x|^2 = sum(s^2) + |residual|^2` on its own.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel_bank::{BankParams, KernelBank};

/// Segment duration used by the hardware encoder, in seconds.
pub const SEGMENT_SECONDS: f64 = 0.0435;

/// One matching-pursuit result: kernel, placement and signed intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Code {
    pub segment_index: usize,
    pub kernel_index: usize,
    /// Sample offset of the atom's first sample within its segment.
    pub tau: usize,
    pub intensity: f64,
}

impl Code {
    /// Start sample of the atom relative to the stream origin.
    pub fn global_time(&self, segment_len: usize) -> usize {
        self.segment_index * segment_len + self.tau
    }

    pub(crate) fn check_against(&self, bank: &KernelBank, segment_len: usize) -> Result<()> {
        let kernel = bank.kernel(self.kernel_index).ok_or_else(|| {
            Error::Contract(format!(
                "kernel index {} outside bank of {}",
                self.kernel_index,
                bank.len()
            ))
        })?;
        if self.tau + kernel.effective_len > segment_len {
            return Err(Error::Contract(format!(
                "kernel {} at tau {} overhangs a {segment_len}-sample segment",
                self.kernel_index, self.tau
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub index: usize,
    pub samples: Vec<f64>,
    /// Seconds from the stream origin.
    pub start_time: f64,
    pub sample_rate: u32,
}

impl Segment {
    pub fn new(index: usize, samples: Vec<f64>, segment_len: usize, sample_rate: u32) -> Self {
        Segment {
            index,
            samples,
            start_time: (index * segment_len) as f64 / f64::from(sample_rate),
            sample_rate,
        }
    }

    pub fn energy(&self) -> f64 {
        energy(&self.samples)
    }
}

/// How the correlation surface is refreshed between iterations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationMode {
    /// FFT correlation once per segment, then subtract the selected atom's
    /// precomputed cross-correlation with every kernel.
    #[default]
    Incremental,
    /// Full FFT correlation of the residual on every iteration.
    Recompute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Codes emitted per segment.
    pub sps: usize,
    pub segment_len: usize,
    pub sample_rate: u32,
    pub bank: BankParams,
    /// Iteration stops once residual energy falls to this floor.
    pub residual_epsilon: f64,
    pub correlation: CorrelationMode,
}

impl EncoderConfig {
    pub fn new(sps: usize, sample_rate: u32) -> Self {
        let segment_len = default_segment_len(sample_rate);
        EncoderConfig {
            sps,
            segment_len,
            sample_rate,
            bank: BankParams::for_segment(sample_rate, segment_len),
            residual_epsilon: 1e-12 * segment_len as f64,
            correlation: CorrelationMode::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sps == 0 {
            return Err(Error::Config("sps must be >= 1".into()));
        }
        if self.segment_len == 0 {
            return Err(Error::Config("segment length must be >= 1".into()));
        }
        if self.sample_rate != self.bank.sample_rate {
            return Err(Error::Config(format!(
                "encoder sample rate {} Hz differs from bank sample rate {} Hz",
                self.sample_rate, self.bank.sample_rate
            )));
        }
        if self.segment_len + self.bank.max_len - 1 > self.bank.fft_size {
            return Err(Error::Config(format!(
                "fft size {} cannot hold a linear correlation of {} + {} - 1 samples",
                self.bank.fft_size, self.segment_len, self.bank.max_len
            )));
        }
        if !(self.residual_epsilon >= 0.0) {
            return Err(Error::Config("residual epsilon must be >= 0".into()));
        }
        Ok(())
    }

    /// Checks the config against an already built bank.
    pub fn validate_for(&self, bank: &KernelBank) -> Result<()> {
        self.validate()?;
        if bank.sample_rate() != self.sample_rate {
            return Err(Error::Config(format!(
                "signal sample rate {} Hz differs from bank sample rate {} Hz",
                self.sample_rate,
                bank.sample_rate()
            )));
        }
        if self.segment_len > bank.max_segment_len() {
            return Err(Error::Config(format!(
                "segment of {} samples too long for bank fft size {}",
                self.segment_len,
                bank.fft_size()
            )));
        }
        Ok(())
    }
}

/// `round(0.0435 * sample_rate)`; 696 samples at 16 kHz.
pub fn default_segment_len(sample_rate: u32) -> usize {
    (SEGMENT_SECONDS * f64::from(sample_rate)).round() as usize
}

pub(crate) fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inner products of a residual with every valid placement of every kernel.
///
/// Row `m` holds `segment_len - effective_len(m) + 1` entries (empty when the
/// kernel is longer than the segment).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSurface {
    rows: Vec<Vec<f64>>,
}

/// Winning cell of a correlation surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub kernel_index: usize,
    pub tau: usize,
    pub intensity: f64,
}

impl CorrelationSurface {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        CorrelationSurface { rows }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, kernel_index: usize, tau: usize) -> Option<f64> {
        self.rows.get(kernel_index)?.get(tau).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.iter().all(Vec::is_empty)
    }

    /// Cell with the largest `|value|`; ties go to the smaller kernel index,
    /// then the smaller offset. `None` when no kernel fits the segment.
    pub fn best_match(&self) -> Option<Match> {
        let mut best: Option<Match> = None;
        let mut best_mag = f64::NEG_INFINITY;
        for (m, row) in self.rows.iter().enumerate() {
            for (tau, &v) in row.iter().enumerate() {
                if v.abs() > best_mag {
                    best_mag = v.abs();
                    best = Some(Match {
                        kernel_index: m,
                        tau,
                        intensity: v,
                    });
                }
            }
        }
        best
    }
}

/// See [`CorrelationSurface::best_match`].
pub fn best_match(surface: &CorrelationSurface) -> Option<Match> {
    surface.best_match()
}

/// Frequency-domain correlation of `residual` against every kernel.
pub fn correlate_all(residual: &[f64], bank: &KernelBank) -> CorrelationSurface {
    let n = bank.fft_size();
    debug_assert!(residual.len() <= bank.max_segment_len());
    let spectrum = bank.forward_spectrum(residual);
    let scale = 1.0 / n as f64;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let rows = bank
        .kernels()
        .iter()
        .map(|k| {
            let valid = (residual.len() + 1).saturating_sub(k.effective_len);
            if valid == 0 {
                return Vec::new();
            }
            for ((dst, x), h) in buf.iter_mut().zip(&spectrum).zip(&k.spectrum) {
                *dst = x * h.conj();
            }
            bank.inverse_in_place(&mut buf);
            buf[..valid].iter().map(|c| c.re * scale).collect()
        })
        .collect();
    CorrelationSurface { rows }
}

/// `x - s * phi_m(. - tau)` as a new segment.
pub fn subtract_atom(residual: &Segment, code: &Code, bank: &KernelBank) -> Result<Segment> {
    code.check_against(bank, residual.samples.len())?;
    let mut out = residual.clone();
    subtract_in_place(&mut out.samples, code.kernel_index, code.tau, code.intensity, bank);
    Ok(out)
}

fn subtract_in_place(x: &mut [f64], kernel_index: usize, tau: usize, s: f64, bank: &KernelBank) {
    let atom = bank.kernels()[kernel_index].support();
    for (v, k) in x[tau..tau + atom.len()].iter_mut().zip(atom) {
        *v -= s * k;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentEncoding {
    pub codes: Vec<Code>,
    pub residual: Segment,
    pub input_energy: f64,
    pub residual_energy: f64,
}

/// Runs up to `config.sps` matching-pursuit iterations on one segment.
///
/// Stops early when the residual energy reaches `residual_epsilon`, when the
/// best correlation is exactly zero, or when subtracting the next atom would
/// no longer lower the residual energy in floating point.
pub fn encode_segment(x: &Segment, bank: &KernelBank, config: &EncoderConfig) -> Result<SegmentEncoding> {
    if x.samples.len() != config.segment_len {
        return Err(Error::Contract(format!(
            "segment has {} samples, expected {}",
            x.samples.len(),
            config.segment_len
        )));
    }
    if x.samples.len() > bank.max_segment_len() {
        return Err(Error::Config(format!(
            "segment of {} samples too long for bank fft size {}",
            x.samples.len(),
            bank.fft_size()
        )));
    }

    let mut residual = x.clone();
    let input_energy = residual.energy();
    let mut current = input_energy;
    let mut codes = Vec::with_capacity(config.sps);
    let mut surface = correlate_all(&residual.samples, bank);
    let mut saved = Vec::with_capacity(bank.max_len());

    for _ in 0..config.sps {
        if current <= config.residual_epsilon {
            break;
        }
        let Some(best) = surface.best_match() else { break };
        let kernel = &bank.kernels()[best.kernel_index];
        let window = best.tau..best.tau + kernel.effective_len;
        // Exact inner product against the live residual.
        let s = dot(&residual.samples[window.clone()], kernel.support());
        if s == 0.0 || best.intensity == 0.0 {
            break;
        }

        saved.clear();
        saved.extend_from_slice(&residual.samples[window.clone()]);
        subtract_in_place(&mut residual.samples, best.kernel_index, best.tau, s, bank);
        let next = residual.energy();
        if !(next < current) {
            residual.samples[window].copy_from_slice(&saved);
            break;
        }
        current = next;
        codes.push(Code {
            segment_index: x.index,
            kernel_index: best.kernel_index,
            tau: best.tau,
            intensity: s,
        });

        match config.correlation {
            CorrelationMode::Recompute => surface = correlate_all(&residual.samples, bank),
            CorrelationMode::Incremental => update_surface(&mut surface, bank, best.kernel_index, best.tau, s),
        }
    }

    Ok(SegmentEncoding {
        codes,
        residual_energy: current,
        residual,
        input_energy,
    })
}

/// Removes `s * <phi_sel(. - tau_sel), phi_m(. - tau)>` from every cell.
fn update_surface(surface: &mut CorrelationSurface, bank: &KernelBank, selected: usize, tau_sel: usize, s: f64) {
    let gram = bank.gram();
    let zero = gram.zero_lag() as isize;
    let sel_len = bank.kernels()[selected].effective_len as isize;
    for (m, row) in surface.rows.iter_mut().enumerate() {
        if row.is_empty() {
            continue;
        }
        let lags = gram.row(selected, m);
        let m_len = bank.kernels()[m].effective_len as isize;
        // Nonzero overlap for lag in (-m_len, sel_len).
        let lo = (tau_sel as isize - m_len + 1).max(0);
        let hi = (tau_sel as isize + sel_len).min(row.len() as isize);
        for tau in lo..hi {
            let lag = tau - tau_sel as isize;
            row[tau as usize] -= s * lags[(lag + zero) as usize];
        }
    }
}

/// Codes and residual bookkeeping for a whole signal.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedStream {
    pub segment_len: usize,
    pub sample_rate: u32,
    /// Length of the unpadded input.
    pub n_samples: usize,
    pub segments: Vec<SegmentEncoding>,
}

impl EncodedStream {
    pub fn codes(&self) -> impl Iterator<Item = &Code> + '_ {
        self.segments.iter().flat_map(|s| s.codes.iter())
    }

    pub fn code_count(&self) -> usize {
        self.segments.iter().map(|s| s.codes.len()).sum()
    }

    /// Padded duration in samples (`segments * segment_len`).
    pub fn duration(&self) -> usize {
        self.segments.len() * self.segment_len
    }

    pub fn input_energy(&self) -> f64 {
        self.segments.iter().map(|s| s.input_energy).sum()
    }

    pub fn residual_energy(&self) -> f64 {
        self.segments.iter().map(|s| s.residual_energy).sum()
    }

    /// Residual energy over input energy; NaN for silent input.
    pub fn residual_energy_fraction(&self) -> f64 {
        let e = self.input_energy();
        if e > 0.0 {
            self.residual_energy() / e
        } else {
            f64::NAN
        }
    }

    /// Segments that stopped before emitting `sps` codes.
    pub fn early_stops(&self, sps: usize) -> usize {
        self.segments.iter().filter(|s| s.codes.len() < sps).count()
    }

    /// Concatenated residual over the padded duration.
    pub fn residual(&self) -> Vec<f64> {
        self.segments.iter().flat_map(|s| s.residual.samples.iter().copied()).collect()
    }
}

/// Splits `signal` into consecutive zero-padded segments of
/// `config.segment_len` samples.
pub fn segment_signal(signal: &[f64], config: &EncoderConfig) -> Vec<Segment> {
    signal
        .chunks(config.segment_len)
        .enumerate()
        .map(|(i, chunk)| {
            let mut samples = chunk.to_vec();
            samples.resize(config.segment_len, 0.0);
            Segment::new(i, samples, config.segment_len, config.sample_rate)
        })
        .collect()
}

/// Encodes every segment of `signal` independently (in parallel).
pub fn encode_stream(signal: &[f64], bank: &KernelBank, config: &EncoderConfig) -> Result<EncodedStream> {
    if signal.is_empty() {
        return Err(Error::EmptyInput("signal has no samples".into()));
    }
    config.validate_for(bank)?;
    let segments = segment_signal(signal, config)
        .par_iter()
        .map(|seg| encode_segment(seg, bank, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(EncodedStream {
        segment_len: config.segment_len,
        sample_rate: config.sample_rate,
        n_samples: signal.len(),
        segments,
    })
}
