//! Sparsity and spectral-entropy measures over binned spike rasters.
//!
//! Entropies are estimator-specific "spectral entropy" in bits: the Shannon
//! entropy of the normalised one-sided power spectrum (bins `1..=n/2`) of a
//! mean-subtracted binned spike train, rectangular window, `n_bins`
//! resolution. Constant trains carry no spectral power and score 0.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::itp::EventStream;

/// Default time-step for binning, in seconds.
pub const DEFAULT_BIN_WIDTH: f64 = 0.010;

/// Spike counts, `n_channels x n_bins`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedRaster {
    pub counts: Vec<Vec<u32>>,
    pub bin_width: f64,
}

impl BinnedRaster {
    pub fn n_channels(&self) -> usize {
        self.counts.len()
    }

    pub fn n_bins(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    /// Counts clamped to 1.
    pub fn binarized(&self) -> BinnedRaster {
        BinnedRaster {
            counts: self.counts.iter().map(|r| r.iter().map(|&c| c.min(1)).collect()).collect(),
            bin_width: self.bin_width,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().map(|&c| u64::from(c)).sum()
    }
}

/// Bins a stream into `ceil(duration / bin_width)` bins per channel.
pub fn bin_events(stream: &EventStream, bin_width: f64) -> Result<BinnedRaster> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::Config(format!("bin width must be positive, got {bin_width}")));
    }
    let bin_samples = bin_width * f64::from(stream.sample_rate);
    let n_bins = ((stream.duration as f64 / bin_samples) - 1e-9).ceil().max(0.0) as usize;
    let mut counts = vec![vec![0u32; n_bins]; stream.n_channels as usize];
    for e in &stream.events {
        let bin = ((e.time as f64 / bin_samples) + 1e-9).floor() as usize;
        if let Some(slot) = counts[e.channel as usize].get_mut(bin.min(n_bins.saturating_sub(1))) {
            *slot += 1;
        }
    }
    Ok(BinnedRaster { counts, bin_width })
}

/// Total spikes over (neurons x time steps), in percent, on the binarized raster.
pub fn sparsity(raster: &BinnedRaster) -> Result<f64> {
    let cells = raster.n_channels() * raster.n_bins();
    if cells == 0 {
        return Err(Error::Contract("sparsity of a raster with no cells is undefined".into()));
    }
    let active = raster.counts.iter().flatten().filter(|&&c| c > 0).count();
    Ok(active as f64 / cells as f64 * 100.0)
}

fn is_constant(row: &[f64]) -> bool {
    row.iter().all(|&v| v == row[0])
}

/// One-sided power spectrum `|X_k|^2`, `k = 1..=n/2`, of the mean-subtracted row.
fn power_spectrum(row: &[f64], planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = row.len();
    let mean = row.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = row.iter().map(|&v| Complex64::new(v - mean, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[1..=n / 2].iter().map(Complex64::norm_sqr).collect()
}

/// Shannon entropy (bits) of a nonnegative vector after normalisation.
fn entropy_of(power: &[f64]) -> f64 {
    let total: f64 = power.iter().sum();
    if !(total > 0.0) {
        return 0.0;
    }
    -power
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| {
            let q = p / total;
            q * q.log2()
        })
        .sum::<f64>()
}

/// Spectral entropy of one binned train.
pub fn channel_entropy(row: &[f64]) -> f64 {
    if row.len() < 2 || is_constant(row) {
        return 0.0;
    }
    entropy_of(&power_spectrum(row, &mut FftPlanner::new()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationEntropy {
    pub population_entropy: f64,
    pub information_gain: f64,
    /// Participation ratio of the channel correlation matrix.
    pub effective_channels: f64,
}

/// Population spectral entropy and information gain.
///
/// The population entropy is the spectral entropy of the summed per-channel
/// power spectra. The gain compares the per-channel entropies with what an
/// uncorrelated population of the same size would carry:
/// `sum_i H_i - n_eff * mean(H_i)`, where `n_eff = n^2 / sum_ij c_ij^2` is the
/// participation ratio of the correlation matrix of the `n` non-constant
/// channels. Identical channels give `n_eff = 1`; independent ones give
/// `n_eff ~ n`.
pub fn population_entropy_and_gain(rows: &[Vec<f64>]) -> PopulationEntropy {
    let mut planner = FftPlanner::new();
    let active: Vec<&Vec<f64>> = rows.iter().filter(|r| r.len() >= 2 && !is_constant(r)).collect();
    if active.is_empty() {
        return PopulationEntropy {
            population_entropy: 0.0,
            information_gain: 0.0,
            effective_channels: 0.0,
        };
    }

    let n_freq = active[0].len() / 2;
    let mut summed = vec![0.0; n_freq];
    let mut entropies = Vec::with_capacity(active.len());
    for row in &active {
        let p = power_spectrum(row, &mut planner);
        entropies.push(entropy_of(&p));
        summed.iter_mut().zip(&p).for_each(|(s, v)| *s += v);
    }
    let population_entropy = entropy_of(&summed);

    // Standardised rows; sum_ij c_ij^2 = |Z Z^T|_F^2.
    let z: Vec<Vec<f64>> = active
        .iter()
        .map(|r| {
            let mean = r.iter().sum::<f64>() / r.len() as f64;
            let centred: Vec<f64> = r.iter().map(|v| v - mean).collect();
            let norm = centred.iter().map(|v| v * v).sum::<f64>().sqrt();
            centred.into_iter().map(|v| v / norm).collect()
        })
        .collect();
    let n = z.len();
    let mut sum_sq = 0.0;
    for i in 0..n {
        for j in i..n {
            let c: f64 = z[i].iter().zip(&z[j]).map(|(a, b)| a * b).sum();
            sum_sq += if i == j { c * c } else { 2.0 * c * c };
        }
    }
    let effective_channels = (n * n) as f64 / sum_sq;
    let mean_entropy = entropies.iter().sum::<f64>() / n as f64;
    let information_gain = (n as f64 - effective_channels) * mean_entropy;

    PopulationEntropy {
        population_entropy,
        information_gain,
        effective_channels,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sparsity_pct: f64,
    pub per_channel_entropy: Vec<f64>,
    pub population_entropy: f64,
    pub information_gain: f64,
    pub spike_count: u64,
    pub n_channels: usize,
    pub n_bins: usize,
    pub bin_width: f64,
}

/// Full report for one stream. Sparsity always uses the binarized raster;
/// `binarize` selects whether entropies see counts or binary trains.
pub fn compute_metrics(stream: &EventStream, bin_width: f64, binarize: bool) -> Result<MetricsReport> {
    let raster = bin_events(stream, bin_width)?;
    let sparsity_pct = sparsity(&raster)?;
    let source = if binarize { raster.binarized() } else { raster.clone() };
    let rows: Vec<Vec<f64>> = source
        .counts
        .iter()
        .map(|r| r.iter().map(|&c| f64::from(c)).collect())
        .collect();
    let per_channel_entropy = rows.iter().map(|r| channel_entropy(r)).collect();
    let pop = population_entropy_and_gain(&rows);
    Ok(MetricsReport {
        sparsity_pct,
        per_channel_entropy,
        population_entropy: pop.population_entropy,
        information_gain: pop.information_gain,
        spike_count: stream.len() as u64,
        n_channels: raster.n_channels(),
        n_bins: raster.n_bins(),
        bin_width,
    })
}
