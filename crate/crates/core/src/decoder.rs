//! Waveform reconstruction from codes and from spike events.

use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};
use crate::itp::{EventStream, LevelTable, LEVELS_PER_KERNEL};
use crate::kernel_bank::KernelBank;
use crate::mp::Code;

fn add_atom(out: &mut [f64], bank: &KernelBank, kernel_index: usize, start: usize, gain: f64) -> Result<()> {
    let atom = bank
        .kernel(kernel_index)
        .ok_or_else(|| Error::Contract(format!("kernel index {kernel_index} outside bank of {}", bank.len())))?
        .support();
    let end = start + atom.len();
    if end > out.len() {
        return Err(Error::Contract(format!(
            "atom of kernel {kernel_index} at sample {start} ends at {end}, past duration {}",
            out.len()
        )));
    }
    for (o, k) in out[start..end].iter_mut().zip(atom) {
        *o += gain * k;
    }
    Ok(())
}

/// `sum_i s_i * phi_{m_i}(t - global_tau_i)` over `duration` samples.
pub fn reconstruct_from_codes<'a>(
    codes: impl IntoIterator<Item = &'a Code>,
    bank: &KernelBank,
    segment_len: usize,
    duration: usize,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; duration];
    for code in codes {
        code.check_against(bank, segment_len)?;
        add_atom(&mut out, bank, code.kernel_index, code.global_time(segment_len), code.intensity)?;
    }
    Ok(out)
}

/// Each spike contributes its channel's (positive) level times the kernel at
/// the spike time.
pub fn reconstruct_from_events(stream: &EventStream, bank: &KernelBank, table: &LevelTable) -> Result<Vec<f64>> {
    let n_channels = (LEVELS_PER_KERNEL * bank.len().min(table.n_kernels())) as u32;
    if stream.n_channels > n_channels {
        return Err(FormatError::ChannelOutOfRange {
            channel: stream.n_channels - 1,
            n_channels,
        }
        .into());
    }
    let mut out = vec![0.0; stream.duration as usize];
    for e in &stream.events {
        if e.channel >= n_channels {
            return Err(FormatError::ChannelOutOfRange {
                channel: e.channel,
                n_channels,
            }
            .into());
        }
        let level = table.channel_level(e.channel as usize).expect("channel checked against table");
        add_atom(&mut out, bank, e.kernel_index(), e.time as usize, level)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub rmse: f64,
    /// `10 log10(|x|^2 / |x - x_hat|^2)`; `+inf` for exact reconstruction,
    /// NaN when the original is silent.
    pub snr_db: f64,
    /// `|x - x_hat|^2 / |x|^2`; NaN when the original is silent.
    pub residual_energy_fraction: f64,
}

pub fn reconstruction_report(original: &[f64], reconstructed: &[f64]) -> Result<ReconstructionReport> {
    if original.len() != reconstructed.len() {
        return Err(Error::Contract(format!(
            "length mismatch: original {} vs reconstruction {}",
            original.len(),
            reconstructed.len()
        )));
    }
    let signal: f64 = original.iter().map(|v| v * v).sum();
    let error: f64 = original.iter().zip(reconstructed).map(|(a, b)| (a - b) * (a - b)).sum();
    let rmse = if original.is_empty() {
        0.0
    } else {
        (error / original.len() as f64).sqrt()
    };
    let (snr_db, residual_energy_fraction) = if signal > 0.0 {
        (10.0 * (signal / error).log10(), error / signal)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(ReconstructionReport {
        rmse,
        snr_db,
        residual_energy_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::itp::{codes_to_events, SpikeEvent};
    use crate::kernel_bank::build_bank;
    use crate::mp::{encode_segment, EncoderConfig, Segment};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (KernelBank, EncoderConfig) {
        let config = EncoderConfig::new(32, 16_000);
        (build_bank(&config.bank).unwrap(), config)
    }

    #[test]
    fn codes_plus_residual_is_identity() {
        let (bank, config) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..696).map(|_| rng.random_range(-1.0..1.0)).collect();
        let enc = encode_segment(&Segment::new(0, x.clone(), 696, 16_000), &bank, &config).unwrap();
        let recon = reconstruct_from_codes(&enc.codes, &bank, 696, 696).unwrap();
        let sum: Vec<f64> = recon.iter().zip(&enc.residual.samples).map(|(a, b)| a + b).collect();
        let report = reconstruction_report(&x, &sum).unwrap();
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / 696.0).sqrt();
        assert!(report.rmse / rms < 1e-6);
    }

    #[test]
    fn empty_codes_give_silence() {
        let (bank, _) = setup();
        assert_eq!(reconstruct_from_codes(&[], &bank, 696, 100).unwrap(), vec![0.0; 100]);
        let stream = EventStream::empty(120, 50, 16_000);
        let table = LevelTable::new(vec![[1.0, 2.0, 3.0]; 40]).unwrap();
        assert_eq!(reconstruct_from_events(&stream, &bank, &table).unwrap(), vec![0.0; 50]);
    }

    #[test]
    fn single_code_is_scaled_atom() {
        let (bank, _) = setup();
        let code = Code { segment_index: 1, kernel_index: 7, tau: 20, intensity: -0.25 };
        let out = reconstruct_from_codes(&[code], &bank, 696, 1392).unwrap();
        let atom = bank.kernels()[7].support();
        for (i, v) in out.iter().enumerate() {
            let expected = if (716..716 + atom.len()).contains(&i) { -0.25 * atom[i - 716] } else { 0.0 };
            assert_eq!(*v, expected);
        }
    }

    #[test]
    fn placement_past_duration_is_rejected() {
        let (bank, _) = setup();
        let code = Code { segment_index: 2, kernel_index: 7, tau: 0, intensity: 1.0 };
        assert!(matches!(reconstruct_from_codes(&[code], &bank, 696, 1392), Err(Error::Contract(_))));
    }

    #[test]
    fn exact_levels_match_code_path() {
        let (bank, _) = setup();
        let table = LevelTable::new(vec![[0.5, 1.0, 2.0]; 40]).unwrap();
        let codes = vec![
            Code { segment_index: 0, kernel_index: 3, tau: 10, intensity: 1.0 },
            Code { segment_index: 0, kernel_index: 30, tau: 300, intensity: 2.0 },
            Code { segment_index: 1, kernel_index: 12, tau: 5, intensity: 0.5 },
        ];
        let itp = codes_to_events(&codes, &table, 696, 1392, 16_000).unwrap();
        let a = reconstruct_from_codes(&codes, &bank, 696, 1392).unwrap();
        let b = reconstruct_from_events(&itp.stream, &bank, &table).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn out_of_range_channel_is_format_error() {
        let (bank, _) = setup();
        let table = LevelTable::new(vec![[1.0, 2.0, 3.0]; 40]).unwrap();
        let stream = EventStream {
            events: vec![SpikeEvent { time: 0, channel: 120 }],
            n_channels: 121,
            duration: 696,
            sample_rate: 16_000,
        };
        assert!(matches!(reconstruct_from_events(&stream, &bank, &table), Err(Error::Format(_))));
    }

    #[test]
    fn linearity() {
        let (bank, _) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut gen = || Code {
            segment_index: rng.random_range(0..3),
            kernel_index: rng.random_range(20..40),
            tau: rng.random_range(0..100),
            intensity: rng.random_range(-1.0..1.0),
        };
        let a: Vec<Code> = (0..20).map(|_| gen()).collect();
        let b: Vec<Code> = (0..20).map(|_| gen()).collect();
        let ra = reconstruct_from_codes(&a, &bank, 696, 2088).unwrap();
        let rb = reconstruct_from_codes(&b, &bank, 696, 2088).unwrap();
        let rab = reconstruct_from_codes(a.iter().chain(&b), &bank, 696, 2088).unwrap();
        for i in 0..2088 {
            assert!((rab[i] - ra[i] - rb[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn report_edge_cases() {
        let x = vec![1.0, -2.0, 0.5];
        let r = reconstruction_report(&x, &x).unwrap();
        assert_eq!(r.rmse, 0.0);
        assert_eq!(r.residual_energy_fraction, 0.0);
        assert_eq!(r.snr_db, f64::INFINITY);

        let r = reconstruction_report(&x, &[0.0; 3]).unwrap();
        assert_eq!(r.residual_energy_fraction, 1.0);
        assert_eq!(r.snr_db, 0.0);

        let r = reconstruction_report(&[0.0; 3], &[0.0; 3]).unwrap();
        assert!(r.snr_db.is_nan() && r.residual_energy_fraction.is_nan());

        assert!(matches!(reconstruction_report(&x, &[0.0; 2]), Err(Error::Contract(_))));
    }
}
