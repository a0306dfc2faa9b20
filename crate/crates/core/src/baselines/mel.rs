use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub n_filters: usize,
    pub frame_len: usize,
    pub hop: usize,
    pub fmin: f64,
    pub fmax: f64,
    /// Added to mel energies before the log.
    pub floor: f64,
}

impl MelConfig {
    /// 40 filters, 25 ms frames, 10 ms hop, 0 Hz to Nyquist.
    pub fn new(sample_rate: u32) -> Self {
        let fs = f64::from(sample_rate);
        MelConfig {
            sample_rate,
            n_filters: 40,
            frame_len: (0.025 * fs).round() as usize,
            hop: (0.010 * fs).round() as usize,
            fmin: 0.0,
            fmax: fs / 2.0,
            floor: 1e-10,
        }
    }

    pub fn n_fft(&self) -> usize {
        self.frame_len.next_power_of_two()
    }

    pub fn n_frames(&self, n_samples: usize) -> usize {
        if n_samples <= self.frame_len {
            1
        } else {
            1 + (n_samples - self.frame_len) / self.hop
        }
    }

    /// Centre sample of frame `i`.
    pub fn frame_center(&self, i: usize) -> usize {
        i * self.hop + self.frame_len / 2
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// `n_filters + 2` band edges in Hz, uniformly spaced on the mel scale.
pub fn mel_edges(config: &MelConfig) -> Vec<f64> {
    let (lo, hi) = (hz_to_mel(config.fmin), hz_to_mel(config.fmax));
    let n = config.n_filters + 1;
    (0..=n).map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / n as f64)).collect()
}

/// Triangular weights, `n_filters x (n_fft/2 + 1)`.
pub fn mel_filterbank(config: &MelConfig) -> Vec<Vec<f64>> {
    let edges = mel_edges(config);
    let n_fft = config.n_fft();
    let bin_hz = f64::from(config.sample_rate) / n_fft as f64;
    (0..config.n_filters)
        .map(|j| {
            let (lo, mid, hi) = (edges[j], edges[j + 1], edges[j + 2]);
            (0..=n_fft / 2)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

/// Linear mel-band energies per frame (Hann window, power spectrum).
pub fn mel_energies(signal: &[f64], config: &MelConfig) -> Vec<Vec<f64>> {
    let n_fft = config.n_fft();
    let fb = mel_filterbank(config);
    let fft = FftPlanner::new().plan_fft_forward(n_fft);
    let window: Vec<f64> = (0..config.frame_len)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / config.frame_len as f64).cos())
        .collect();
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    (0..config.n_frames(signal.len()))
        .map(|f| {
            let start = f * config.hop;
            buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            for (i, w) in window.iter().enumerate() {
                if let Some(&x) = signal.get(start + i) {
                    buf[i].re = x * w;
                }
            }
            fft.process(&mut buf);
            let power: Vec<f64> = buf[..=n_fft / 2].iter().map(Complex64::norm_sqr).collect();
            fb.iter()
                .map(|weights| weights.iter().zip(&power).map(|(w, p)| w * p).sum())
                .collect()
        })
        .collect()
}

/// Log-compressed mel energies, `frames x n_filters`.
pub fn mel_spectrogram(signal: &[f64], config: &MelConfig) -> Vec<Vec<f64>> {
    mel_energies(signal, config)
        .into_iter()
        .map(|frame| frame.into_iter().map(|e| (e + config.floor).ln()).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tone_lands_in_its_band() {
        let config = MelConfig::new(16_000);
        let tone: Vec<f64> = (0..8000)
            .map(|n| (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / 16_000.0).sin())
            .collect();
        // Band edges recomputed from the HTK mel formula.
        let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
        let top = mel(8000.0);
        let edge = |i: usize| 700.0 * (10f64.powf(top * i as f64 / 41.0 / 2595.0) - 1.0);
        for frame in mel_energies(&tone, &config).iter().skip(1).take(20) {
            let total: f64 = frame.iter().sum();
            let best = (0..40).max_by(|&a, &b| frame[a].total_cmp(&frame[b])).unwrap();
            assert!(edge(best) < 1000.0 && 1000.0 < edge(best + 2), "band {best}");
            let near: f64 = frame[best.saturating_sub(1)..(best + 2).min(40)].iter().sum();
            assert!(near / total > 0.9);
        }
    }

    #[test]
    fn silence_is_floor() {
        let config = MelConfig::new(16_000);
        let spec = mel_spectrogram(&[0.0; 4000], &config);
        assert_eq!(spec.len(), config.n_frames(4000));
        let floor = config.floor.ln();
        assert!(spec.iter().flatten().all(|&v| v == floor));
    }

    #[test]
    fn noise_is_spread() {
        let config = MelConfig::new(16_000);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let noise: Vec<f64> = (0..4000).map(|_| rng.random_range(-1.0..1.0)).collect();
            for frame in mel_energies(&noise, &config) {
                let total: f64 = frame.iter().sum();
                assert!(frame.iter().all(|&e| e / total < 0.5));
            }
        }
    }

    #[test]
    fn short_signal_gives_one_frame() {
        let config = MelConfig::new(16_000);
        assert_eq!(mel_spectrogram(&[0.1; 50], &config).len(), 1);
        assert_eq!(config.n_frames(400), 1);
        assert_eq!(config.n_frames(560), 2);
    }
}
