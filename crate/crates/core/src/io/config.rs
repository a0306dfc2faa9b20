//! TOML configuration file and flag > file > default resolution.
//!
//! ```toml
//! [encoder]
//! sps = 128
//! sample_rate = 16000
//! segment_len = 696
//! residual_epsilon = 6.96e-10
//! correlation = "incremental"   # or "recompute"
//! levels = "levels.csv"
//!
//! [bank]
//! n_kernels = 40
//! fmin = 100.0
//! fmax = 7400.0
//! order = 4
//! max_len = 512
//! fft_size = 2048
//!
//! [metrics]
//! bin_width = 0.010
//! binarize = false
//!
//! [bench]
//! jobs = 4
//! seed = 0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel_bank::{linear_fft_size, BankParams};
use crate::metrics::DEFAULT_BIN_WIDTH;
use crate::mp::{default_segment_len, CorrelationMode, EncoderConfig};

pub const DEFAULT_SPS: usize = 128;
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSection {
    pub sps: Option<usize>,
    pub sample_rate: Option<u32>,
    pub segment_len: Option<usize>,
    pub residual_epsilon: Option<f64>,
    pub correlation: Option<CorrelationMode>,
    pub levels: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankSection {
    pub n_kernels: Option<usize>,
    pub fmin: Option<f64>,
    pub fmax: Option<f64>,
    pub order: Option<u32>,
    pub max_len: Option<usize>,
    pub fft_size: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    pub bin_width: Option<f64>,
    pub binarize: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub encoder: EncoderSection,
    #[serde(default)]
    pub bank: BankSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub bench: BenchSection,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut file = Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        // Relative level-table paths are taken relative to the config file.
        if let (Some(levels), Some(dir)) = (&file.encoder.levels, path.parent()) {
            if levels.is_relative() {
                file.encoder.levels = Some(dir.join(levels));
            }
        }
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Values given on the command line; `None` defers to the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub sps: Option<usize>,
    pub sample_rate: Option<u32>,
    pub levels: Option<PathBuf>,
    pub bin_width: Option<f64>,
    pub binarize: Option<bool>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub encoder: EncoderConfig,
    pub levels: Option<PathBuf>,
    pub bin_width: f64,
    pub binarize: bool,
    pub jobs: usize,
    pub seed: u64,
}

impl Settings {
    pub fn resolve(file: &ConfigFile, flags: &Overrides) -> Result<Self> {
        let e = &file.encoder;
        let b = &file.bank;
        let sps = flags.sps.or(e.sps).unwrap_or(DEFAULT_SPS);
        let sample_rate = flags.sample_rate.or(e.sample_rate).unwrap_or(DEFAULT_SAMPLE_RATE);
        let segment_len = e.segment_len.unwrap_or_else(|| default_segment_len(sample_rate));
        let defaults = BankParams::for_segment(sample_rate, segment_len);
        let max_len = b.max_len.unwrap_or(defaults.max_len);
        let bank = BankParams {
            n_kernels: b.n_kernels.unwrap_or(defaults.n_kernels),
            sample_rate,
            fmin: b.fmin.unwrap_or(defaults.fmin),
            fmax: b.fmax.unwrap_or(defaults.fmax),
            order: b.order.unwrap_or(defaults.order),
            max_len,
            fft_size: b.fft_size.unwrap_or_else(|| linear_fft_size(segment_len, max_len)),
        };
        let encoder = EncoderConfig {
            sps,
            segment_len,
            sample_rate,
            bank,
            residual_epsilon: e.residual_epsilon.unwrap_or(1e-12 * segment_len as f64),
            correlation: e.correlation.unwrap_or_default(),
        };
        encoder.validate()?;
        let bin_width = flags.bin_width.or(file.metrics.bin_width).unwrap_or(DEFAULT_BIN_WIDTH);
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(Error::Config(format!("bin_width must be positive, got {bin_width}")));
        }
        let jobs = flags
            .jobs
            .or(file.bench.jobs)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        Ok(Settings {
            encoder,
            levels: flags.levels.clone().or_else(|| e.levels.clone()),
            bin_width,
            binarize: flags.binarize.or(file.metrics.binarize).unwrap_or(false),
            jobs,
            seed: flags.seed.or(file.bench.seed).unwrap_or(0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let s = Settings::resolve(&ConfigFile::default(), &Overrides::default()).unwrap();
        assert_eq!(s.encoder, EncoderConfig::new(DEFAULT_SPS, DEFAULT_SAMPLE_RATE));
        assert_eq!(s.encoder.segment_len, 696);
        assert_eq!(s.bin_width, 0.010);
        assert!(!s.binarize);
        assert_eq!(s.levels, None);
    }

    #[test]
    fn precedence_per_field() {
        let file = ConfigFile::parse(
            "[encoder]\nsps = 64\nsample_rate = 8000\nlevels = \"file.csv\"\n\
             [metrics]\nbin_width = 0.02\nbinarize = true\n[bench]\njobs = 3\nseed = 9\n",
        )
        .unwrap();
        let from_file = Settings::resolve(&file, &Overrides::default()).unwrap();
        assert_eq!(from_file.encoder.sps, 64);
        assert_eq!(from_file.encoder.sample_rate, 8000);
        assert_eq!(from_file.encoder.segment_len, 348);
        assert_eq!(from_file.levels.as_deref(), Some(Path::new("file.csv")));
        assert_eq!(from_file.bin_width, 0.02);
        assert!(from_file.binarize);
        assert_eq!((from_file.jobs, from_file.seed), (3, 9));

        let flags = Overrides {
            sps: Some(256),
            sample_rate: Some(16_000),
            levels: Some("flag.csv".into()),
            bin_width: Some(0.005),
            binarize: Some(false),
            jobs: Some(1),
            seed: Some(2),
        };
        let s = Settings::resolve(&file, &flags).unwrap();
        assert_eq!(s.encoder.sps, 256);
        assert_eq!(s.encoder.sample_rate, 16_000);
        assert_eq!(s.encoder.segment_len, 696);
        assert_eq!(s.levels.as_deref(), Some(Path::new("flag.csv")));
        assert_eq!(s.bin_width, 0.005);
        assert!(!s.binarize);
        assert_eq!((s.jobs, s.seed), (1, 2));
    }

    #[test]
    fn bank_section_and_round_trip() {
        let file = ConfigFile::parse("[bank]\nn_kernels = 20\nmax_len = 256\ncorrelation = 1\n");
        assert!(matches!(file, Err(Error::Config(_))));
        let file = ConfigFile::parse("[bank]\nn_kernels = 20\nmax_len = 256\n[encoder]\ncorrelation = \"recompute\"\n").unwrap();
        let s = Settings::resolve(&file, &Overrides::default()).unwrap();
        assert_eq!(s.encoder.bank.n_kernels, 20);
        assert_eq!(s.encoder.bank.fft_size, 1024);
        assert_eq!(s.encoder.correlation, CorrelationMode::Recompute);
        assert_eq!(ConfigFile::parse(&file.to_toml()).unwrap(), file);
    }

    #[test]
    fn invalid_values() {
        let zero = Overrides { sps: Some(0), ..Overrides::default() };
        assert!(Settings::resolve(&ConfigFile::default(), &zero).is_err());
        let bad_bin = Overrides { bin_width: Some(-1.0), ..Overrides::default() };
        assert!(Settings::resolve(&ConfigFile::default(), &bad_bin).is_err());
    }
}
