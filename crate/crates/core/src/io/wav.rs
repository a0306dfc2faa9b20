//! WAV input and output.

use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::io::resample::resample;

/// Mono samples in [-1, 1] at `sample_rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

fn audio_err(e: hound::Error, path: &Path) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => FormatError::Audio(format!("{}: {other}", path.display())).into(),
    }
}

/// Reads a WAV file as it is stored, averaged to mono.
pub fn read_wav(path: &Path) -> Result<Audio> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = hound::WavReader::new(std::io::BufReader::new(file)).map_err(|e| audio_err(e, path))?;
    let spec = reader.spec();
    if spec.channels == 0 {
        return Err(FormatError::Audio(format!("{}: zero channels", path.display())).into());
    }
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            let scale = 1.0 / f64::from(1u32 << (spec.bits_per_sample - 1).min(31));
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) * scale))
                .collect::<Result<_, _>>()
                .map_err(|e| audio_err(e, path))?
        }
        hound::SampleFormat::Float => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| f64::from(v).clamp(-1.0, 1.0)))
            .collect::<Result<_, _>>()
            .map_err(|e| audio_err(e, path))?,
    };
    let channels = usize::from(spec.channels);
    let samples = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    Ok(Audio {
        samples,
        sample_rate: spec.sample_rate,
    })
}

/// Loads `path` as mono and resamples to `target_rate`.
pub fn load_audio(path: &Path, target_rate: u32) -> Result<Vec<f64>> {
    let audio = read_wav(path)?;
    if audio.samples.is_empty() {
        return Err(Error::EmptyInput(format!("{} has no samples", path.display())));
    }
    if audio.sample_rate == target_rate {
        Ok(audio.samples)
    } else {
        Ok(resample(&audio.samples, audio.sample_rate, target_rate))
    }
}

/// Writes mono 32-bit float WAV.
pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut cursor = std::io::Cursor::new(Vec::new());
    {
        let mut writer = hound::WavWriter::new(&mut cursor, spec).map_err(|e| audio_err(e, path))?;
        for &s in samples {
            writer.write_sample(s as f32).map_err(|e| audio_err(e, path))?;
        }
        writer.finalize().map_err(|e| audio_err(e, path))?;
    }
    crate::io::write_atomic(path, &cursor.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_int(path: &Path, rate: u32, channels: u16, data: &[i16]) {
        let spec = hound::WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for &d in data {
            w.write_sample(d).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn stereo_int_is_averaged_and_scaled() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.wav");
        write_int(&path, 16_000, 2, &[16384, 0, -32768, -32768]);
        let a = read_wav(&path).unwrap();
        assert_eq!(a.samples, vec![0.25, -1.0]);
        assert_eq!(load_audio(&path, 16_000).unwrap(), vec![0.25, -1.0]);
    }

    #[test]
    fn resamples_to_target() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.wav");
        write_int(&path, 22_050, 1, &vec![1000; 22_050]);
        assert_eq!(load_audio(&path, 16_000).unwrap().len(), 16_000);
    }

    #[test]
    fn float_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let x = vec![0.5, -0.25, 0.125];
        write_wav(&path, &x, 16_000).unwrap();
        let a = read_wav(&path).unwrap();
        assert_eq!(a.samples, x);
        assert_eq!(a.sample_rate, 16_000);
    }

    #[test]
    fn errors_are_distinguishable() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("missing.wav");
        assert!(matches!(load_audio(&missing, 16_000), Err(Error::Io { path, .. }) if path == missing));

        let junk = dir.path().join("junk.wav");
        std::fs::write(&junk, b"not a wav file at all").unwrap();
        assert!(matches!(load_audio(&junk, 16_000), Err(Error::Format(FormatError::Audio(_)))));

        let empty = dir.path().join("empty.wav");
        write_int(&empty, 16_000, 1, &[]);
        assert!(matches!(load_audio(&empty, 16_000), Err(Error::EmptyInput(_))));
    }
}
