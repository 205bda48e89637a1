//! Sample streams: synthetic generators, LIBSVM datasets and node-wise
//! partitioning.

mod libsvm;
mod partition;
mod synthetic;
mod waveform;

pub use libsvm::{load_libsvm, parse_libsvm, Dataset, LabelMode};
pub use partition::partition_dataset;
pub use synthetic::{
    chaotic1_next, chaotic1_series, chaotic2_next, chaotic2_phi, chaotic2_series, gen_chaotic1_stream,
    gen_chaotic2_stream, gen_kernel_expansion_stream, gen_quadratic_stream, gen_quadratic_stream_with,
    Chaotic1Params, Chaotic1Regressor, Chaotic2Params, KernelExpansion, KernelExpansionParams, QuadraticModel,
};
pub use waveform::{generate_waveform, WAVEFORM_DIM};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Sample { x, y }
    }
}

/// The time-ordered samples observed by one node.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    pub node_id: usize,
    pub samples: Vec<Sample>,
    pub seed: u64,
}

impl SampleStream {
    pub fn new(node_id: usize, samples: Vec<Sample>, seed: u64) -> Self {
        SampleStream { node_id, samples, seed }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Input dimension, taken from the first sample.
    pub fn dim(&self) -> Option<usize> {
        self.samples.first().map(|s| s.x.len())
    }

    /// Sample at 1-based time `n`.
    pub fn at(&self, n: usize) -> Result<&Sample> {
        n.checked_sub(1)
            .and_then(|i| self.samples.get(i))
            .ok_or_else(|| Error::Stream(format!("node {} has no sample at time {n} (length {})", self.node_id, self.len())))
    }
}

/// A held-out evaluation split: inputs and ±1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
}

impl TestSet {
    pub fn from_dataset(ds: &Dataset) -> Self {
        TestSet { xs: ds.rows.clone(), ys: ds.labels.clone() }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}
