//! Rational polyphase resampling with a Blackman-windowed sinc prototype.

/// Zero crossings of the sinc on each side of the centre tap, per phase.
const HALF_TAPS: usize = 16;
/// Cutoff relative to the lower of the two Nyquist rates.
const ROLLOFF: f64 = 0.94;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Upsample-by-`up`, filter, downsample-by-`down` resampler.
#[derive(Debug, Clone)]
pub struct PolyphaseResampler {
    up: usize,
    down: usize,
    /// Prototype low-pass at the upsampled rate, scaled by `up`.
    taps: Vec<f64>,
}

impl PolyphaseResampler {
    pub fn new(from_rate: u32, to_rate: u32) -> Self {
        let g = gcd(u64::from(from_rate), u64::from(to_rate)).max(1);
        let up = (u64::from(to_rate) / g) as usize;
        let down = (u64::from(from_rate) / g) as usize;
        let factor = up.max(down);
        let len = 2 * HALF_TAPS * factor + 1;
        let center = (len - 1) as f64 / 2.0;
        // Normalised cutoff in cycles per upsampled sample.
        let fc = 0.5 * ROLLOFF / factor as f64;
        let taps = (0..len)
            .map(|i| {
                let t = i as f64 - center;
                let sinc = if t == 0.0 {
                    2.0 * fc
                } else {
                    (2.0 * std::f64::consts::PI * fc * t).sin() / (std::f64::consts::PI * t)
                };
                let w = i as f64 / (len - 1) as f64;
                let window = 0.42 - 0.5 * (2.0 * std::f64::consts::PI * w).cos()
                    + 0.08 * (4.0 * std::f64::consts::PI * w).cos();
                up as f64 * sinc * window
            })
            .collect();
        PolyphaseResampler { up, down, taps }
    }

    pub fn ratio(&self) -> (usize, usize) {
        (self.up, self.down)
    }

    /// Output length `ceil(n * up / down)`, zero-phase (group delay removed).
    pub fn process(&self, input: &[f64]) -> Vec<f64> {
        if self.up == self.down {
            return input.to_vec();
        }
        let n_out = (input.len() * self.up).div_ceil(self.down);
        let delay = (self.taps.len() - 1) / 2;
        let n_taps = self.taps.len() as isize;
        let up = self.up as isize;
        (0..n_out)
            .map(|k| {
                // Position on the upsampled grid, shifted by the filter delay.
                let t = (k * self.down + delay) as isize;
                // Input i contributes tap t - i*up, which must lie in [0, n_taps).
                let i_lo = ((t - n_taps + 1).max(0) + up - 1) / up;
                let i_hi = (t / up).min(input.len() as isize - 1);
                let mut acc = 0.0;
                let mut i = i_lo;
                while i <= i_hi {
                    acc += input[i as usize] * self.taps[(t - i * up) as usize];
                    i += 1;
                }
                acc
            })
            .collect()
    }
}

/// Resamples `input` from `from_rate` to `to_rate`.
pub fn resample(input: &[f64], from_rate: u32, to_rate: u32) -> Vec<f64> {
    if from_rate == to_rate {
        return input.to_vec();
    }
    PolyphaseResampler::new(from_rate, to_rate).process(input)
}
