use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training schedule. Learning rate and neighbourhood radius both decay
/// exponentially from their start to their end value over all updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomConfig {
    pub rows: usize,
    pub cols: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub radius_start: f64,
    pub radius_end: f64,
    pub seed: u64,
}

impl Default for SomConfig {
    fn default() -> Self {
        SomConfig {
            rows: 50,
            cols: 10,
            epochs: 20,
            lr_start: 0.5,
            lr_end: 0.01,
            radius_start: 25.0,
            radius_end: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomCodebook {
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    /// Row-major grid of prototypes; unit `r * cols + c`.
    pub prototypes: Vec<Vec<f64>>,
    pub config: SomConfig,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl SomCodebook {
    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    /// Euclidean-nearest prototype; ties go to the lower unit index.
    pub fn best_unit(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.prototypes.iter().enumerate() {
            let d = sq_dist(p, x);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    pub fn grid_position(&self, unit: usize) -> (usize, usize) {
        (unit / self.cols, unit % self.cols)
    }
}

/// Trains a self-organising map with a Gaussian neighbourhood.
///
/// Prototypes start uniformly inside the data's bounding box; each epoch
/// presents every frame once in a seeded random order.
pub fn som_train(frames: &[Vec<f64>], config: &SomConfig) -> Result<SomCodebook> {
    let Some(first) = frames.first() else {
        return Err(Error::EmptyInput("no training frames".into()));
    };
    let dim = first.len();
    if frames.iter().any(|f| f.len() != dim || f.iter().any(|v| !v.is_finite())) {
        return Err(Error::Contract("training frames must share one finite dimension".into()));
    }
    if config.rows == 0 || config.cols == 0 {
        return Err(Error::Config("SOM grid must be non-empty".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut lo = first.clone();
    let mut hi = first.clone();
    for f in frames {
        for d in 0..dim {
            lo[d] = lo[d].min(f[d]);
            hi[d] = hi[d].max(f[d]);
        }
    }
    let units = config.rows * config.cols;
    let mut prototypes: Vec<Vec<f64>> = (0..units)
        .map(|_| {
            (0..dim)
                .map(|d| if hi[d] > lo[d] { rng.random_range(lo[d]..hi[d]) } else { lo[d] })
                .collect()
        })
        .collect();
    let coords: Vec<(f64, f64)> = (0..units)
        .map(|u| ((u / config.cols) as f64, (u % config.cols) as f64))
        .collect();

    let total = (config.epochs * frames.len()).max(1);
    let mut order: Vec<usize> = (0..frames.len()).collect();
    let mut step = 0usize;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let frac = if total > 1 { step as f64 / (total - 1) as f64 } else { 0.0 };
            let lr = config.lr_start * (config.lr_end / config.lr_start).powf(frac);
            let radius = config.radius_start * (config.radius_end / config.radius_start).powf(frac);
            let x = &frames[i];

            let mut bmu = 0;
            let mut best = f64::INFINITY;
            for (u, p) in prototypes.iter().enumerate() {
                let d = sq_dist(p, x);
                if d < best {
                    bmu = u;
                    best = d;
                }
            }
            let (br, bc) = coords[bmu];
            let denom = 2.0 * radius * radius;
            for (p, &(r, c)) in prototypes.iter_mut().zip(&coords) {
                let g2 = (r - br) * (r - br) + (c - bc) * (c - bc);
                let h = (-g2 / denom).exp();
                if h < 1e-12 {
                    continue;
                }
                let rate = lr * h;
                for (w, v) in p.iter_mut().zip(x) {
                    *w += rate * (v - *w);
                }
            }
            step += 1;
        }
    }

    Ok(SomCodebook {
        rows: config.rows,
        cols: config.cols,
        dim,
        prototypes,
        config: config.clone(),
    })
}
