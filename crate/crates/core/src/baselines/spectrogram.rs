use crate::baselines::mel::{mel_spectrogram, MelConfig};
use crate::baselines::som::SomCodebook;
use crate::error::{Error, Result};
use crate::itp::{EventStream, SpikeEvent};

pub const SPECTROGRAM_CHANNELS: usize = 500;

/// One spike per mel frame, on the channel of the nearest SOM prototype,
/// timed at the frame centre.
pub fn spectrogram_encode(signal: &[f64], codebook: &SomCodebook, mel: &MelConfig) -> Result<EventStream> {
    if codebook.dim != mel.n_filters {
        return Err(Error::Contract(format!(
            "codebook dimension {} does not match {} mel filters",
            codebook.dim, mel.n_filters
        )));
    }
    let frames = mel_spectrogram(signal, mel);
    let events = frames
        .iter()
        .enumerate()
        .map(|(i, frame)| SpikeEvent {
            time: mel.frame_center(i) as u64,
            channel: codebook.best_unit(frame) as u32,
        })
        .collect();
    let duration = signal.len().max(mel.frame_len) as u64;
    EventStream::new(events, codebook.len() as u32, duration, mel.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::som::{som_train, SomConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trained(rng: &mut ChaCha8Rng) -> (SomCodebook, MelConfig) {
        let mel = MelConfig::new(16_000);
        let signal: Vec<f64> = (0..16_000).map(|_| rng.random_range(-0.5..0.5)).collect();
        let frames = mel_spectrogram(&signal, &mel);
        let config = SomConfig { epochs: 2, seed: 1, ..SomConfig::default() };
        (som_train(&frames, &config).unwrap(), mel)
    }

    #[test]
    fn one_spike_per_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (book, mel) = trained(&mut rng);
        let signal: Vec<f64> = (0..8000).map(|_| rng.random_range(-0.5..0.5)).collect();
        let stream = spectrogram_encode(&signal, &book, &mel).unwrap();
        assert_eq!(stream.len(), mel.n_frames(8000));
        assert_eq!(stream.n_channels, 500);

        // Channels match a brute-force nearest-prototype scan.
        for (event, frame) in stream.events.iter().zip(mel_spectrogram(&signal, &mel)) {
            let dists: Vec<f64> = book
                .prototypes
                .iter()
                .map(|p| p.iter().zip(&frame).map(|(a, b)| (a - b).powi(2)).sum())
                .collect();
            let min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(dists[event.channel as usize], min);
        }
    }

    #[test]
    fn prototype_frame_fires_its_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut book, mel) = trained(&mut rng);
        let target = mel_spectrogram(&[0.0; 400], &mel).remove(0);
        book.prototypes[123] = target;
        let stream = spectrogram_encode(&[0.0; 400], &book, &mel).unwrap();
        assert_eq!(stream.events[0].channel, 123);
    }
}
