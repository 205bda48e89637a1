//! Kernel LMS baselines: the exact growing-sum KLMS and quantized KLMS.

use crate::data::SampleStream;
use crate::error::{check_dim, Error, Result};
use crate::features::gaussian_kernel_unchecked;
use crate::learners::{default_cadence, MetricsTrace, NetworkState, Recorder};

/// What the quantization size `q` is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuantizationMetric {
    /// `‖x − c‖² ≤ q` merges into `c`.
    #[default]
    SquaredDistance,
    /// `‖x − c‖ ≤ q` merges into `c`.
    Distance,
}

/// A kernel expansion `f(x) = Σ_i α_i κ(c_i, x)` grown by QKLMS.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    centers: Vec<Vec<f64>>,
    coeffs: Vec<f64>,
    sigma: f64,
    q: f64,
    metric: QuantizationMetric,
}

impl Dictionary {
    pub fn new(sigma: f64, q: f64) -> Result<Self> {
        Dictionary::with_metric(sigma, q, QuantizationMetric::default())
    }

    pub fn with_metric(sigma: f64, q: f64, metric: QuantizationMetric) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::param(format!("kernel bandwidth must be positive, got {sigma}")));
        }
        if !(q >= 0.0) {
            return Err(Error::param(format!("quantization size must be nonnegative, got {q}")));
        }
        Ok(Dictionary { centers: Vec::new(), coeffs: Vec::new(), sigma, q, metric })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn metric(&self) -> QuantizationMetric {
        self.metric
    }

    /// Appends an entry without quantization.
    pub fn push(&mut self, center: Vec<f64>, coeff: f64) -> Result<()> {
        if let Some(c) = self.centers.first() {
            check_dim("dictionary center", c.len(), center.len())?;
        }
        self.centers.push(center);
        self.coeffs.push(coeff);
        Ok(())
    }

    /// Index of the nearest center (lowest index on ties) and the quantity
    /// compared against `q`.
    fn nearest(&self, x: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.centers.iter().enumerate() {
            let d2: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.is_none_or(|(_, b)| d2 < b) {
                best = Some((i, d2));
            }
        }
        best.map(|(i, d2)| match self.metric {
            QuantizationMetric::SquaredDistance => (i, d2),
            QuantizationMetric::Distance => (i, d2.sqrt()),
        })
    }
}

/// `Σ_i α_i κ(c_i, x)`; zero on an empty dictionary.
pub fn klms_predict(dict: &Dictionary, x: &[f64]) -> Result<f64> {
    if let Some(c) = dict.centers.first() {
        check_dim("prediction input", c.len(), x.len())?;
    }
    Ok(dict
        .centers
        .iter()
        .zip(&dict.coeffs)
        .map(|(c, a)| a * gaussian_kernel_unchecked(c, x, dict.sigma))
        .sum())
}

/// One QKLMS update; returns the a-priori error `ε = y − f(x)`.
///
/// The step `μ·ε` is added to the nearest center when it lies within `q`,
/// otherwise `x` becomes a new center.
pub fn qklms_step(dict: &mut Dictionary, x: &[f64], y: f64, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::param(format!("step size must be positive, got {mu}")));
    }
    let err = y - klms_predict(dict, x)?;
    match dict.nearest(x) {
        Some((j, dist)) if dist <= dict.q => dict.coeffs[j] += mu * err,
        _ => {
            dict.centers.push(x.to_vec());
            dict.coeffs.push(mu * err);
        }
    }
    Ok(err)
}

/// Plain KLMS: every sample becomes a center with coefficient `μ·ε_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Klms {
    pub inputs: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub sigma: f64,
    pub mu: f64,
}

impl Klms {
    pub fn new(sigma: f64, mu: f64) -> Result<Self> {
        if !(sigma > 0.0 && mu > 0.0) {
            return Err(Error::param("KLMS needs sigma > 0 and mu > 0"));
        }
        Ok(Klms { inputs: Vec::new(), alphas: Vec::new(), sigma, mu })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (xi, a) in self.inputs.iter().zip(&self.alphas) {
            acc += a * gaussian_kernel_unchecked(xi, x, self.sigma);
        }
        acc
    }

    /// Returns the a-priori error.
    pub fn step(&mut self, x: &[f64], y: f64) -> Result<f64> {
        if let Some(first) = self.inputs.first() {
            check_dim("KLMS input", first.len(), x.len())?;
        }
        let err = y - self.predict(x);
        self.inputs.push(x.to_vec());
        self.alphas.push(self.mu * err);
        Ok(err)
    }
}

fn baseline_trace(recorder: Recorder, iterations: usize) -> MetricsTrace {
    MetricsTrace {
        rows: recorder.rows,
        extra_columns: vec!["dict_size".into()],
        k: 1,
        iterations,
        psi_losses: None,
        max_theta_norm: 0.0,
        diverged_at: None,
        final_state: NetworkState::zeros(1, 0),
    }
}

fn check_horizon(stream: &SampleStream, horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::param("horizon must be at least 1"));
    }
    if stream.len() < horizon {
        return Err(Error::Stream(format!("stream supplies {} samples, horizon is {horizon}", stream.len())));
    }
    Ok(())
}

/// Runs QKLMS over the first `horizon` samples and records the squared
/// a-priori error and dictionary size.
pub fn run_qklms(
    stream: &SampleStream,
    dict: &mut Dictionary,
    mu: f64,
    horizon: usize,
    cadence: Option<usize>,
) -> Result<MetricsTrace> {
    check_horizon(stream, horizon)?;
    let mut rec = Recorder::new(cadence.unwrap_or_else(|| default_cadence(horizon)), horizon);
    for (i, s) in stream.samples[..horizon].iter().enumerate() {
        let err = qklms_step(dict, &s.x, s.y, mu)?;
        if let Some(row) = rec.push(i + 1, err * err) {
            row.extras = vec![Some(dict.len() as f64)];
        }
    }
    Ok(baseline_trace(rec, horizon))
}

/// Runs the exact KLMS over the first `horizon` samples.
pub fn run_klms(stream: &SampleStream, klms: &mut Klms, horizon: usize, cadence: Option<usize>) -> Result<MetricsTrace> {
    check_horizon(stream, horizon)?;
    let mut rec = Recorder::new(cadence.unwrap_or_else(|| default_cadence(horizon)), horizon);
    for (i, s) in stream.samples[..horizon].iter().enumerate() {
        let err = klms.step(&s.x, s.y)?;
        if let Some(row) = rec.push(i + 1, err * err) {
            row.extras = vec![Some(klms.inputs.len() as f64)];
        }
    }
    Ok(baseline_trace(rec, horizon))
}
