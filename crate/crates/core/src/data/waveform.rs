//! Breiman's waveform generator, binarized as class 1 versus the rest.
//!
//! Each sample is a random convex combination of two of three triangular
//! base waves on 21 points plus unit Gaussian noise.

use rand::Rng;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::seeded_rng;

pub const WAVEFORM_DIM: usize = 21;

fn base_wave(shift: i32) -> [f64; WAVEFORM_DIM] {
    let mut h = [0.0; WAVEFORM_DIM];
    for (i, v) in h.iter_mut().enumerate() {
        let pos = i as i32 + 1 - shift;
        *v = (6 - (pos - 11).abs()).max(0) as f64;
    }
    h
}

/// `n` rows; classes are drawn uniformly, class 1 is labelled `+1`.
pub fn generate_waveform(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::param("waveform needs at least one row"));
    }
    let waves = [base_wave(0), base_wave(4), base_wave(-4)];
    let pairs = [(0, 1), (0, 2), (1, 2)];
    let mut rng = seeded_rng(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let class = rng.random_range(0..3);
        let u: f64 = rng.random();
        let (a, b) = pairs[class];
        let row = (0..WAVEFORM_DIM)
            .map(|i| u * waves[a][i] + (1.0 - u) * waves[b][i] + rng.sample::<f64, _>(StandardNormal))
            .collect();
        rows.push(row);
        labels.push(if class == 0 { 1.0 } else { -1.0 });
    }
    Ok(Dataset { name: "waveform".into(), rows, labels, dim: WAVEFORM_DIM })
}
