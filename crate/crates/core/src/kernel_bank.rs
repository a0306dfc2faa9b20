//! Gammatone dictionary.
//!
//! Kernels are 4th-order gammatone atoms `t^(n-1) exp(-2 pi b t) cos(2 pi fc t)`
//! with `b = 1.019 * ERB(fc)` and centre frequencies spaced uniformly on the
//! ERB-rate scale. Each atom is truncated where its envelope falls below
//! [`ENVELOPE_FLOOR`] of its peak, hard-limited to the bank's maximum length
//! and normalised to unit energy. Forward spectra at the bank FFT size are
//! precomputed so that correlation against a segment costs one forward
//! transform plus one inverse transform per kernel.

use std::fmt;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Envelope level (relative to the envelope peak) below which an atom is zeroed.
pub const ENVELOPE_FLOOR: f64 = 1e-4;

/// Bandwidth factor mapping ERB to the gammatone decay rate.
const ERB_TO_DECAY: f64 = 1.019;

/// Glasberg & Moore equivalent rectangular bandwidth in Hz.
pub fn erb(freq_hz: f64) -> f64 {
    24.7 * (1.0 + 4.37 * freq_hz / 1000.0)
}

/// ERB-rate (number of ERBs below `freq_hz`).
pub fn erb_rate(freq_hz: f64) -> f64 {
    21.4 * (1.0 + 0.00437 * freq_hz).log10()
}

/// Inverse of [`erb_rate`].
pub fn erb_rate_to_hz(rate: f64) -> f64 {
    (10f64.powf(rate / 21.4) - 1.0) / 0.00437
}

/// `n` centre frequencies uniformly spaced in ERB-rate between `fmin` and `fmax` inclusive.
pub fn erb_space(n: usize, fmin: f64, fmax: f64) -> Vec<f64> {
    if n == 1 {
        return vec![fmin];
    }
    let (lo, hi) = (erb_rate(fmin), erb_rate(fmax));
    (0..n)
        .map(|i| {
            if i == 0 {
                fmin
            } else if i == n - 1 {
                fmax
            } else {
                erb_rate_to_hz(lo + (hi - lo) * i as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

/// Synthesises one unit-norm gammatone atom of length `max_len`.
///
/// The first sample corresponds to `t = 0`. Samples past the envelope
/// truncation point are exactly zero.
pub fn gammatone_atom(center_freq: f64, sample_rate: u32, order: u32, max_len: usize) -> Result<Vec<f64>> {
    let fs = f64::from(sample_rate);
    if !(center_freq > 0.0 && center_freq < fs / 2.0) {
        return Err(Error::Domain(format!(
            "centre frequency {center_freq} Hz outside (0, {}) Hz",
            fs / 2.0
        )));
    }
    if order == 0 {
        return Err(Error::Domain("gammatone order must be >= 1".into()));
    }
    if max_len == 0 {
        return Err(Error::Domain("kernel length must be >= 1".into()));
    }

    let decay = 2.0 * std::f64::consts::PI * ERB_TO_DECAY * erb(center_freq);
    let power = f64::from(order - 1);
    let envelope = |n: usize| {
        let t = n as f64 / fs;
        t.powf(power) * (-decay * t).exp()
    };

    // Envelope peaks at t = (order - 1) / decay.
    let peak_t = power / decay;
    let peak_idx = (peak_t * fs).floor() as usize;
    let peak = envelope(peak_idx).max(envelope(peak_idx + 1));
    let floor = ENVELOPE_FLOOR * peak;

    let mut effective_len = max_len;
    for n in peak_idx + 1..max_len {
        if envelope(n) < floor {
            effective_len = n;
            break;
        }
    }

    let omega = 2.0 * std::f64::consts::PI * center_freq / fs;
    let mut samples = vec![0.0; max_len];
    for (n, s) in samples.iter_mut().enumerate().take(effective_len) {
        *s = envelope(n) * (omega * n as f64).cos();
    }
    let norm = samples.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Domain(format!("degenerate atom at {center_freq} Hz")));
    }
    samples.iter_mut().for_each(|v| *v /= norm);
    Ok(samples)
}

/// Construction parameters for a [`KernelBank`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankParams {
    pub n_kernels: usize,
    pub sample_rate: u32,
    pub fmin: f64,
    pub fmax: f64,
    pub order: u32,
    pub max_len: usize,
    pub fft_size: usize,
}

impl BankParams {
    pub const DEFAULT_KERNELS: usize = 40;
    pub const DEFAULT_FMIN: f64 = 100.0;
    pub const DEFAULT_FMAX: f64 = 7400.0;
    pub const DEFAULT_ORDER: u32 = 4;
    pub const DEFAULT_MAX_LEN: usize = 512;

    /// Default 40-kernel bank with an FFT large enough for linear
    /// correlation against segments of `segment_len` samples.
    pub fn for_segment(sample_rate: u32, segment_len: usize) -> Self {
        let max_len = Self::DEFAULT_MAX_LEN.min(segment_len.max(1));
        BankParams {
            n_kernels: Self::DEFAULT_KERNELS,
            sample_rate,
            fmin: Self::DEFAULT_FMIN,
            fmax: Self::DEFAULT_FMAX,
            order: Self::DEFAULT_ORDER,
            max_len,
            fft_size: linear_fft_size(segment_len, max_len),
        }
    }
}

/// Smallest power of two that holds a linear correlation of a
/// `segment_len` signal against a `max_len` kernel.
pub fn linear_fft_size(segment_len: usize, max_len: usize) -> usize {
    (segment_len + max_len).saturating_sub(1).max(1).next_power_of_two()
}

#[derive(Debug, Clone)]
pub struct GammatoneKernel {
    pub index: usize,
    pub center_freq: f64,
    /// Time-domain atom, `max_len` long, unit L2 norm.
    pub samples: Vec<f64>,
    /// Samples at and beyond this index are exactly zero.
    pub effective_len: usize,
    /// Forward FFT of `samples` zero-padded to the bank FFT size.
    pub spectrum: Vec<Complex64>,
}

impl GammatoneKernel {
    /// The nonzero support of the atom.
    pub fn support(&self) -> &[f64] {
        &self.samples[..self.effective_len]
    }
}

/// Immutable dictionary of gammatone kernels; cheap to share across threads.
#[derive(Clone)]
pub struct KernelBank {
    params: BankParams,
    kernels: Vec<GammatoneKernel>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    gram: Arc<OnceLock<Gram>>,
}

impl fmt::Debug for KernelBank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelBank")
            .field("params", &self.params)
            .field("n_kernels", &self.kernels.len())
            .finish()
    }
}

/// Builds a bank of `params.n_kernels` ERB-spaced gammatone kernels.
pub fn build_bank(params: &BankParams) -> Result<KernelBank> {
    let fs = f64::from(params.sample_rate);
    if params.n_kernels == 0 {
        return Err(Error::Config("kernel count must be >= 1".into()));
    }
    let range_ok = if params.n_kernels == 1 {
        params.fmin > 0.0 && params.fmin <= params.fmax
    } else {
        params.fmin > 0.0 && params.fmin < params.fmax
    };
    if !range_ok || params.fmax >= fs / 2.0 {
        return Err(Error::Config(format!(
            "invalid frequency range [{}, {}] Hz at {} Hz sampling",
            params.fmin, params.fmax, params.sample_rate
        )));
    }
    if params.order == 0 {
        return Err(Error::Config("gammatone order must be >= 1".into()));
    }
    if params.max_len == 0 {
        return Err(Error::Config("kernel length must be >= 1".into()));
    }
    if !params.fft_size.is_power_of_two() || params.fft_size < params.max_len {
        return Err(Error::Config(format!(
            "fft size {} must be a power of two >= kernel length {}",
            params.fft_size, params.max_len
        )));
    }

    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(params.fft_size);
    let inverse = planner.plan_fft_inverse(params.fft_size);

    let kernels = erb_space(params.n_kernels, params.fmin, params.fmax)
        .into_iter()
        .enumerate()
        .map(|(index, center_freq)| {
            let samples = gammatone_atom(center_freq, params.sample_rate, params.order, params.max_len)?;
            let effective_len = samples.iter().rposition(|&v| v != 0.0).map_or(0, |i| i + 1);
            let mut spectrum = vec![Complex64::new(0.0, 0.0); params.fft_size];
            for (dst, &src) in spectrum.iter_mut().zip(&samples) {
                dst.re = src;
            }
            forward.process(&mut spectrum);
            Ok(GammatoneKernel {
                index,
                center_freq,
                samples,
                effective_len,
                spectrum,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(KernelBank {
        params: params.clone(),
        kernels,
        forward,
        inverse,
        gram: Arc::new(OnceLock::new()),
    })
}

impl KernelBank {
    pub fn params(&self) -> &BankParams {
        &self.params
    }

    pub fn kernels(&self) -> &[GammatoneKernel] {
        &self.kernels
    }

    pub fn kernel(&self, index: usize) -> Option<&GammatoneKernel> {
        self.kernels.get(index)
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn sample_rate(&self) -> u32 {
        self.params.sample_rate
    }

    pub fn fft_size(&self) -> usize {
        self.params.fft_size
    }

    pub fn max_len(&self) -> usize {
        self.params.max_len
    }

    /// Longest linear correlation the bank FFT can hold without wrap-around.
    pub fn max_segment_len(&self) -> usize {
        self.params.fft_size + 1 - self.params.max_len
    }

    /// Zero-padded forward FFT of `signal` at the bank size.
    pub(crate) fn forward_spectrum(&self, signal: &[f64]) -> Vec<Complex64> {
        debug_assert!(signal.len() <= self.params.fft_size);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.params.fft_size];
        for (dst, &src) in buf.iter_mut().zip(signal) {
            dst.re = src;
        }
        self.forward.process(&mut buf);
        buf
    }

    pub(crate) fn inverse_in_place(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }

    /// Pairwise kernel cross-correlations, built on first use.
    pub(crate) fn gram(&self) -> &Gram {
        self.gram.get_or_init(|| Gram::build(&self.kernels, self.params.max_len))
    }

    /// Causal convolution of `signal` with every kernel, one channel at a time.
    ///
    /// Blocks of the input are transformed once; `visit` receives each
    /// channel's full-length filter output.
    pub fn filter_each(&self, signal: &[f64], mut visit: impl FnMut(usize, &[f64])) {
        let n = self.params.fft_size;
        let block = n + 1 - self.params.max_len;
        let blocks: Vec<(usize, Vec<Complex64>)> = signal
            .chunks(block)
            .enumerate()
            .map(|(b, chunk)| (b * block, self.forward_spectrum(chunk)))
            .collect();

        let scale = 1.0 / n as f64;
        let mut out = vec![0.0; signal.len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for kernel in &self.kernels {
            out.iter_mut().for_each(|v| *v = 0.0);
            for (start, spec) in &blocks {
                for ((dst, x), k) in buf.iter_mut().zip(spec).zip(&kernel.spectrum) {
                    *dst = x * k;
                }
                self.inverse.process(&mut buf);
                let end = (start + n).min(out.len());
                for (o, v) in out[*start..end].iter_mut().zip(&buf) {
                    *o += v.re * scale;
                }
            }
            visit(kernel.index, &out);
        }
    }
}

/// Cross-correlations `sum_u a[u] b[u - lag]` for every ordered kernel pair
/// and every lag in `(-max_len, max_len)`.
#[derive(Debug, Clone)]
pub(crate) struct Gram {
    n_kernels: usize,
    max_len: usize,
    data: Vec<f64>,
}

impl Gram {
    fn build(kernels: &[GammatoneKernel], max_len: usize) -> Self {
        let n_lags = 2 * max_len - 1;
        let n = n_lags.next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);

        let spectra: Vec<Vec<Complex64>> = kernels
            .iter()
            .map(|k| {
                let mut buf = vec![Complex64::new(0.0, 0.0); n];
                for (dst, &src) in buf.iter_mut().zip(&k.samples) {
                    dst.re = src;
                }
                forward.process(&mut buf);
                buf
            })
            .collect();

        let m = kernels.len();
        let scale = 1.0 / n as f64;
        let mut data = vec![0.0; m * m * n_lags];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for a in 0..m {
            for b in 0..m {
                for ((dst, x), y) in buf.iter_mut().zip(&spectra[a]).zip(&spectra[b]) {
                    *dst = x * y.conj();
                }
                inverse.process(&mut buf);
                let row = &mut data[(a * m + b) * n_lags..(a * m + b + 1) * n_lags];
                for (slot, lag) in row.iter_mut().zip(-(max_len as isize - 1)..) {
                    *slot = buf[lag.rem_euclid(n as isize) as usize].re * scale;
                }
            }
        }
        Gram {
            n_kernels: m,
            max_len,
            data,
        }
    }

    /// Lag-indexed row for the pair `(a, b)`; index `lag + max_len - 1`.
    pub(crate) fn row(&self, a: usize, b: usize) -> &[f64] {
        let n_lags = 2 * self.max_len - 1;
        let off = (a * self.n_kernels + b) * n_lags;
        &self.data[off..off + n_lags]
    }

    pub(crate) fn zero_lag(&self) -> usize {
        self.max_len - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_params() -> BankParams {
        BankParams {
            n_kernels: 40,
            sample_rate: 16_000,
            fmin: 100.0,
            fmax: 7400.0,
            order: 4,
            max_len: 1024,
            fft_size: 2048,
        }
    }

    fn naive_dft_magnitude(x: &[f64], n: usize) -> Vec<f64> {
        (0..n / 2 + 1)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &v) in x.iter().enumerate() {
                    let ph = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                    re += v * ph.cos();
                    im += v * ph.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    #[test]
    fn forty_kernel_bank() {
        let bank = build_bank(&default_params()).unwrap();
        assert_eq!(bank.len(), 40);
        for pair in bank.kernels().windows(2) {
            assert!(pair[0].center_freq < pair[1].center_freq);
        }
        for k in bank.kernels() {
            let norm: f64 = k.samples.iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() < 1e-9);
            assert!(k.effective_len <= bank.max_len());
            assert!(k.samples[k.effective_len..].iter().all(|&v| v == 0.0));
        }
        assert_eq!(bank.kernels()[0].center_freq, 100.0);
        assert_eq!(bank.kernels()[39].center_freq, 7400.0);
    }

    #[test]
    fn single_kernel_bank() {
        let params = BankParams {
            n_kernels: 1,
            fmin: 440.0,
            fmax: 440.0,
            ..default_params()
        };
        let bank = build_bank(&params).unwrap();
        assert_eq!(bank.len(), 1);
        assert_eq!(bank.kernels()[0].center_freq, 440.0);
        let norm: f64 = bank.kernels()[0].samples.iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_peak_within_one_erb() {
        let bank = build_bank(&default_params()).unwrap();
        let bin_hz = 16_000.0 / 2048.0;
        for k in bank.kernels() {
            // Independent DFT of the time-domain atom.
            let mag = naive_dft_magnitude(k.support(), 2048);
            let peak_bin = (0..mag.len()).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap();
            let peak_hz = peak_bin as f64 * bin_hz;
            assert!(
                (peak_hz - k.center_freq).abs() <= erb(k.center_freq),
                "kernel {} peak {peak_hz} Hz vs centre {} Hz",
                k.index,
                k.center_freq
            );
        }
    }

    #[test]
    fn stored_spectrum_matches_dft() {
        let params = BankParams {
            n_kernels: 4,
            max_len: 128,
            fft_size: 256,
            fmin: 300.0,
            fmax: 5000.0,
            ..default_params()
        };
        let bank = build_bank(&params).unwrap();
        for k in bank.kernels() {
            for (bin, c) in k.spectrum.iter().enumerate() {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &v) in k.samples.iter().enumerate() {
                    let ph = -2.0 * std::f64::consts::PI * (bin * t) as f64 / 256.0;
                    re += v * ph.cos();
                    im += v * ph.sin();
                }
                assert!((c.re - re).abs() < 1e-9 && (c.im - im).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn nyquist_is_out_of_domain() {
        assert!(matches!(gammatone_atom(8000.0, 16_000, 4, 1024), Err(Error::Domain(_))));
        assert!(matches!(gammatone_atom(0.0, 16_000, 4, 1024), Err(Error::Domain(_))));
    }

    #[test]
    fn atom_is_unit_norm() {
        let atom = gammatone_atom(440.0, 16_000, 4, 1024).unwrap();
        assert_eq!(atom.len(), 1024);
        let norm: f64 = atom.iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert_eq!(atom[0], 0.0);
    }

    #[test]
    fn low_kernels_ring_longer() {
        // Envelope-decay oracle: the envelope t^3 exp(-2 pi b t) drops below
        // 1e-4 of its peak where x^3 e^-x = 1e-4 * 27 e^-3 with x = 2 pi b t.
        let decay_point = |f: f64| {
            let b = 2.0 * std::f64::consts::PI * 1.019 * erb(f);
            let target = 1e-4 * 27.0 * (-3.0f64).exp();
            let mut x: f64 = 3.0;
            while x.powi(3) * (-x).exp() >= target {
                x += 1e-4;
            }
            x / b * 16_000.0
        };
        let len = |f: f64| {
            let a = gammatone_atom(f, 16_000, 4, 4096).unwrap();
            a.iter().rposition(|&v| v != 0.0).unwrap() + 1
        };
        let (lo, hi) = (len(100.0), len(4000.0));
        assert!(lo > hi);
        assert!((lo as f64 - decay_point(100.0)).abs() <= 2.0);
        assert!((hi as f64 - decay_point(4000.0)).abs() <= 2.0);
    }

    #[test]
    fn rejects_bad_ranges() {
        let bad = [
            BankParams { fmin: 0.0, ..default_params() },
            BankParams { fmin: 5000.0, fmax: 4000.0, ..default_params() },
            BankParams { fmax: 8000.0, ..default_params() },
            BankParams { fft_size: 512, ..default_params() },
            BankParams { fft_size: 2000, ..default_params() },
        ];
        for p in bad {
            assert!(matches!(build_bank(&p), Err(Error::Config(_))), "{p:?}");
        }
    }

    #[test]
    fn deterministic_build() {
        let a = build_bank(&default_params()).unwrap();
        let b = build_bank(&default_params()).unwrap();
        for (x, y) in a.kernels().iter().zip(b.kernels()) {
            assert_eq!(x.samples, y.samples);
            assert_eq!(x.spectrum, y.spectrum);
        }
    }

    #[test]
    fn gram_matches_direct_correlation() {
        let params = BankParams {
            n_kernels: 3,
            max_len: 64,
            fft_size: 128,
            fmin: 800.0,
            fmax: 3000.0,
            ..default_params()
        };
        let bank = build_bank(&params).unwrap();
        let gram = bank.gram();
        for a in 0..3 {
            for b in 0..3 {
                let row = gram.row(a, b);
                for lag in -63isize..64 {
                    let mut direct = 0.0;
                    for u in 0..64isize {
                        let v = u - lag;
                        if (0..64).contains(&v) {
                            direct += bank.kernels()[a].samples[u as usize] * bank.kernels()[b].samples[v as usize];
                        }
                    }
                    let got = row[(lag + gram.zero_lag() as isize) as usize];
                    assert!((got - direct).abs() < 1e-12);
                }
            }
        }
        assert!((gram.row(1, 1)[gram.zero_lag()] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn filter_matches_direct_convolution() {
        let params = BankParams {
            n_kernels: 2,
            max_len: 32,
            fft_size: 64,
            fmin: 1000.0,
            fmax: 3000.0,
            ..default_params()
        };
        let bank = build_bank(&params).unwrap();
        let signal: Vec<f64> = (0..150).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        bank.filter_each(&signal, |m, y| {
            let k = &bank.kernels()[m].samples;
            for n in 0..signal.len() {
                let direct: f64 = (0..k.len().min(n + 1)).map(|j| k[j] * signal[n - j]).sum();
                assert!((y[n] - direct).abs() < 1e-9);
            }
        });
    }
}
