//! Nearest-centroid probe over pooled per-channel spike rates.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::itp::EventStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    pub labels: Vec<String>,
    pub centroids: Vec<Vec<f64>>,
    pub n_channels: usize,
}

/// Per-channel spike counts divided by duration in seconds.
pub fn probe_features(stream: &EventStream) -> Vec<f64> {
    let seconds = stream.duration_seconds();
    let scale = if seconds > 0.0 { 1.0 / seconds } else { 0.0 };
    stream.channel_counts().into_iter().map(|c| c as f64 * scale).collect()
}

fn check_dim(stream: &EventStream, n_channels: usize) -> Result<()> {
    if stream.n_channels as usize != n_channels {
        return Err(Error::Contract(format!(
            "stream has {} channels, probe expects {n_channels}",
            stream.n_channels
        )));
    }
    Ok(())
}

pub fn probe_train<'a>(examples: impl IntoIterator<Item = (&'a str, &'a EventStream)>) -> Result<ProbeModel> {
    let mut sums: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
    let mut n_channels = None;
    for (label, stream) in examples {
        let dim = *n_channels.get_or_insert(stream.n_channels as usize);
        check_dim(stream, dim)?;
        let (sum, count) = sums.entry(label).or_insert_with(|| (vec![0.0; dim], 0));
        for (s, f) in sum.iter_mut().zip(probe_features(stream)) {
            *s += f;
        }
        *count += 1;
    }
    if sums.len() < 2 {
        return Err(Error::Contract(format!("probe needs at least 2 classes, got {}", sums.len())));
    }
    let (labels, centroids) = sums
        .into_iter()
        .map(|(label, (sum, count))| (label.to_string(), sum.into_iter().map(|s| s / count as f64).collect()))
        .unzip();
    Ok(ProbeModel {
        labels,
        centroids,
        n_channels: n_channels.expect("at least two examples"),
    })
}

impl ProbeModel {
    /// Label of the nearest centroid (Euclidean; ties go to the earlier label).
    pub fn classify(&self, stream: &EventStream) -> Result<&str> {
        check_dim(stream, self.n_channels)?;
        let x = probe_features(stream);
        let mut best = (f64::INFINITY, 0);
        for (i, c) in self.centroids.iter().enumerate() {
            let d: f64 = c.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, i);
            }
        }
        Ok(&self.labels[best.1])
    }
}

/// Fraction of examples whose predicted label equals the given one.
pub fn probe_eval<'a>(model: &ProbeModel, examples: impl IntoIterator<Item = (&'a str, &'a EventStream)>) -> Result<f64> {
    let (mut hits, mut total) = (0usize, 0usize);
    for (label, stream) in examples {
        hits += usize::from(model.classify(stream)? == label);
        total += 1;
    }
    if total == 0 {
        return Err(Error::EmptyInput("no evaluation examples".into()));
    }
    Ok(hits as f64 / total as f64)
}

/// Class label from a file name of the form `<label>_<rest>.<ext>`.
pub fn label_from_path(path: &Path) -> Option<String> {
    let stem = path.file_stem()?.to_str()?;
    let label = stem.split('_').next()?;
    (!label.is_empty() && label != stem).then(|| label.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::itp::SpikeEvent;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stream_on(channel: u32, n: u64) -> EventStream {
        let events = (0..n).map(|t| SpikeEvent { time: t, channel }).collect();
        EventStream::new(events, 10, 16_000, 16_000).unwrap()
    }

    #[test]
    fn memorizes_single_examples() {
        let streams: Vec<EventStream> = (0..10).map(|c| stream_on(c, 5 + u64::from(c))).collect();
        let labels: Vec<String> = (0..10).map(|c| c.to_string()).collect();
        let pairs: Vec<(&str, &EventStream)> = labels.iter().map(String::as_str).zip(&streams).collect();
        let model = probe_train(pairs.clone()).unwrap();
        assert_eq!(probe_eval(&model, pairs).unwrap(), 1.0);
    }

    #[test]
    fn shuffled_labels_sit_near_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut accs = Vec::new();
        for _ in 0..40 {
            let make = |rng: &mut ChaCha8Rng| {
                let events = (0..200)
                    .map(|t| SpikeEvent { time: t, channel: rng.random_range(0..10) })
                    .collect();
                EventStream::new(events, 10, 16_000, 16_000).unwrap()
            };
            let train: Vec<EventStream> = (0..100).map(|_| make(&mut rng)).collect();
            let test: Vec<EventStream> = (0..100).map(|_| make(&mut rng)).collect();
            let mut train_labels: Vec<String> = (0..100).map(|i| (i % 10).to_string()).collect();
            let test_labels: Vec<String> = (0..100).map(|i| (i % 10).to_string()).collect();
            train_labels.shuffle(&mut rng);
            let model = probe_train(train_labels.iter().map(String::as_str).zip(&train)).unwrap();
            accs.push(probe_eval(&model, test_labels.iter().map(String::as_str).zip(&test)).unwrap());
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        assert!((mean - 0.1).abs() <= 0.05, "{mean}");
    }

    #[test]
    fn errors() {
        let a = stream_on(0, 3);
        assert!(probe_train([("a", &a), ("a", &a)]).is_err());
        let model = probe_train([("a", &a), ("b", &stream_on(1, 3))]).unwrap();
        let wide = EventStream::empty(11, 100, 16_000);
        assert!(probe_train([("a", &a), ("b", &wide)]).is_err());
        assert!(model.classify(&wide).is_err());
    }

    #[test]
    fn labels_from_names() {
        assert_eq!(label_from_path(Path::new("d/7_f3_12.wav")).as_deref(), Some("7"));
        assert_eq!(label_from_path(Path::new("plain.wav")), None);
    }
}
