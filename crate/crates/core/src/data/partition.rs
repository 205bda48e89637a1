use rand::seq::SliceRandom;

use super::{Dataset, Sample, SampleStream};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded_rng, tags};

/// Splits a seeded permutation of `ds` into `k` chunks of `⌊n/k⌋` rows; the
/// `n mod k` trailing rows of the permutation are dropped.
pub fn partition_dataset(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<SampleStream>> {
    if k == 0 || k > ds.len() {
        return Err(Error::param(format!("cannot split {} rows over {k} nodes", ds.len())));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut seeded_rng(seed));
    let chunk = ds.len() / k;
    Ok(order
        .chunks_exact(chunk)
        .take(k)
        .enumerate()
        .map(|(node, idx)| {
            let samples = idx.iter().map(|&i| Sample::new(ds.rows[i].clone(), ds.labels[i])).collect();
            SampleStream::new(node, samples, derive_seed(seed, tags::PARTITION, node as u64))
        })
        .collect())
}
