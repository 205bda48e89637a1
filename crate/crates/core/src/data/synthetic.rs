//! Synthetic regression streams.
//!
//! Each node draws its inputs and noise from its own generator, seeded by
//! `derive_seed(seed, NODE, k)`; planted models come from a separate seed so
//! every node observes the same target function.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Sample, SampleStream};
use crate::error::{Error, Result};
use crate::features::{dot, gaussian_kernel_unchecked};
use crate::rng::{derive_seed, seeded_rng, tags, DetRng};

fn normal(rng: &mut DetRng) -> f64 {
    rng.sample(StandardNormal)
}

fn normal_vec(rng: &mut DetRng, n: usize, std: f64) -> Vec<f64> {
    (0..n).map(|_| std * normal(rng)).collect()
}

fn node_rng(seed: u64, node: usize) -> (u64, DetRng) {
    let s = derive_seed(seed, tags::NODE, node as u64);
    (s, seeded_rng(s))
}

fn check_counts(k: usize, n: usize) -> Result<()> {
    if k == 0 || n == 0 {
        return Err(Error::param(format!("stream generation needs K >= 1 and n >= 1 (got K={k}, n={n})")));
    }
    Ok(())
}

/// `f(x) = Σ_m a_m κ(c_m, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelExpansion {
    pub centers: Vec<Vec<f64>>,
    pub coeffs: Vec<f64>,
    pub sigma: f64,
}

impl KernelExpansion {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(&self.coeffs)
            .map(|(c, a)| a * gaussian_kernel_unchecked(c, x, self.sigma))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelExpansionParams {
    pub k: usize,
    pub n_per_node: usize,
    pub d: usize,
    /// Number of planted centers.
    pub m: usize,
    pub sigma: f64,
    /// Standard deviation of both the inputs and the planted centers.
    pub sigma_x: f64,
    pub sigma_eta: f64,
    /// Standard deviation of the planted coefficients.
    pub coeff_std: f64,
}

impl Default for KernelExpansionParams {
    fn default() -> Self {
        KernelExpansionParams {
            k: 1,
            n_per_node: 5000,
            d: 5,
            m: 10,
            sigma: 5.0,
            sigma_x: 1.0,
            sigma_eta: 0.1,
            coeff_std: 5.0,
        }
    }
}

/// Streams `y = Σ a_m κ(c_m, x) + η` with `x ~ N(0, σ_x² I_d)`.
///
/// The expansion (centers `~ N(0, σ_x² I_d)`, coefficients `~ N(0, coeff_std²)`)
/// is drawn from `expansion_seed`.
pub fn gen_kernel_expansion_stream(
    p: &KernelExpansionParams,
    expansion_seed: u64,
    seed: u64,
) -> Result<(Vec<SampleStream>, KernelExpansion)> {
    check_counts(p.k, p.n_per_node)?;
    if p.d == 0 || p.m == 0 {
        return Err(Error::param("kernel expansion needs d >= 1 and M >= 1"));
    }
    if !(p.sigma > 0.0 && p.sigma_x > 0.0 && p.sigma_eta >= 0.0 && p.coeff_std >= 0.0) {
        return Err(Error::param("kernel expansion scales must be positive"));
    }
    let mut rng = seeded_rng(expansion_seed);
    let centers: Vec<Vec<f64>> = (0..p.m).map(|_| normal_vec(&mut rng, p.d, p.sigma_x)).collect();
    let coeffs = normal_vec(&mut rng, p.m, p.coeff_std);
    let model = KernelExpansion { centers, coeffs, sigma: p.sigma };
    let streams = (0..p.k)
        .map(|node| {
            let (s, mut rng) = node_rng(seed, node);
            let samples = (0..p.n_per_node)
                .map(|_| {
                    let x = normal_vec(&mut rng, p.d, p.sigma_x);
                    let y = model.eval(&x) + p.sigma_eta * normal(&mut rng);
                    Sample { x, y }
                })
                .collect();
            SampleStream::new(node, samples, s)
        })
        .collect();
    Ok((streams, model))
}

/// `f(x) = w₀ᵀx + 0.1·(w₁ᵀx)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    pub w0: Vec<f64>,
    pub w1: Vec<f64>,
}

impl QuadraticModel {
    /// Draws `w₀, w₁ ~ N(0, I_d)`.
    pub fn sample(d: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let w0 = normal_vec(&mut rng, d, 1.0);
        let w1 = normal_vec(&mut rng, d, 1.0);
        QuadraticModel { w0, w1 }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let q = dot(&self.w1, x);
        dot(&self.w0, x) + 0.1 * q * q
    }

    /// `E[y²]` for `x ~ N(0, I)`: `‖w₀‖² + 0.03‖w₁‖⁴ + σ_η²`.
    pub fn second_moment(&self, sigma_eta: f64) -> f64 {
        let n1 = dot(&self.w1, &self.w1);
        dot(&self.w0, &self.w0) + 0.03 * n1 * n1 + sigma_eta * sigma_eta
    }
}

/// Quadratic streams with `d = 5`, `σ_η = 0.05` and a model drawn from `seed`.
pub fn gen_quadratic_stream(k: usize, n_per_node: usize, seed: u64) -> Result<(Vec<SampleStream>, QuadraticModel)> {
    let model = QuadraticModel::sample(5, derive_seed(seed, tags::MODEL, 0));
    let streams = gen_quadratic_stream_with(&model, k, n_per_node, 0.05, seed)?;
    Ok((streams, model))
}

/// Quadratic streams for a given model; inputs `x ~ N(0, I_d)`.
pub fn gen_quadratic_stream_with(
    model: &QuadraticModel,
    k: usize,
    n_per_node: usize,
    sigma_eta: f64,
    seed: u64,
) -> Result<Vec<SampleStream>> {
    check_counts(k, n_per_node)?;
    if model.w0.len() != model.w1.len() || model.w0.is_empty() {
        return Err(Error::param("quadratic model needs equal non-empty w0, w1"));
    }
    let d = model.w0.len();
    Ok((0..k)
        .map(|node| {
            let (s, mut rng) = node_rng(seed, node);
            let samples = (0..n_per_node)
                .map(|_| {
                    let x = normal_vec(&mut rng, d, 1.0);
                    let y = model.eval(&x) + sigma_eta * normal(&mut rng);
                    Sample { x, y }
                })
                .collect();
            SampleStream::new(node, samples, s)
        })
        .collect())
}

/// Learner input for the first chaotic series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chaotic1Regressor {
    /// `x_n = y_{n−1}`.
    PrevOutput,
    /// `x_n = (y_{n−1}, u_{n−1})`.
    PrevOutputAndInput,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chaotic1Params {
    pub sigma_u: f64,
    pub sigma_eta: f64,
    pub d1: f64,
    pub regressor: Chaotic1Regressor,
}

impl Default for Chaotic1Params {
    fn default() -> Self {
        Chaotic1Params { sigma_u: 0.15, sigma_eta: 0.01, d1: 1.0, regressor: Chaotic1Regressor::PrevOutput }
    }
}

/// `d_n = d_{n−1}/(1 + d²_{n−1}) + u³_{n−1}`.
pub fn chaotic1_next(d_prev: f64, u_prev: f64) -> f64 {
    d_prev / (1.0 + d_prev * d_prev) + u_prev * u_prev * u_prev
}

/// `(u, d, y)` for times `1..=len` (index 0 is time 1).
pub fn chaotic1_series(len: usize, p: &Chaotic1Params, rng: &mut DetRng) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut u = Vec::with_capacity(len);
    let mut d = Vec::with_capacity(len);
    let mut y = Vec::with_capacity(len);
    for t in 0..len {
        u.push(p.sigma_u * normal(rng));
        let dt = if t == 0 { p.d1 } else { chaotic1_next(d[t - 1], u[t - 1]) };
        d.push(dt);
        y.push(dt + p.sigma_eta * normal(rng));
    }
    (u, d, y)
}

/// One sample per time `n = 2..=n_per_node + 1`.
pub fn gen_chaotic1_stream(k: usize, n_per_node: usize, p: &Chaotic1Params, seed: u64) -> Result<Vec<SampleStream>> {
    check_counts(k, n_per_node)?;
    Ok((0..k)
        .map(|node| {
            let (s, mut rng) = node_rng(seed, node);
            let (u, _, y) = chaotic1_series(n_per_node + 1, p, &mut rng);
            let samples = (1..=n_per_node)
                .map(|t| {
                    let x = match p.regressor {
                        Chaotic1Regressor::PrevOutput => vec![y[t - 1]],
                        Chaotic1Regressor::PrevOutputAndInput => vec![y[t - 1], u[t - 1]],
                    };
                    Sample { x, y: y[t] }
                })
                .collect();
            SampleStream::new(node, samples, s)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chaotic2Params {
    pub var_v: f64,
    /// Variance of the innovation added to `0.5·v` in `u`.
    pub var_u_noise: f64,
    pub sigma_eta: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Default for Chaotic2Params {
    fn default() -> Self {
        Chaotic2Params { var_v: 0.0156, var_u_noise: 0.0156, sigma_eta: 0.001, d1: 1.0, d2: 1.0 }
    }
}

/// Output nonlinearity of the second chaotic series.
pub fn chaotic2_phi(d: f64) -> f64 {
    if d >= 0.0 {
        d / (3.0 * (0.1 + 0.9 * d * d).sqrt())
    } else {
        -d * d * (1.0 - (0.7 * d).exp()) / 3.0
    }
}

/// `d_n = u_n + 0.5 v_n − 0.2 d_{n−1} + 0.35 d_{n−2}`.
pub fn chaotic2_next(u: f64, v: f64, d_prev: f64, d_prev2: f64) -> f64 {
    u + 0.5 * v - 0.2 * d_prev + 0.35 * d_prev2
}

/// `(u, v, d, y)` for times `1..=len` (index 0 is time 1).
pub fn chaotic2_series(len: usize, p: &Chaotic2Params, rng: &mut DetRng) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let (sv, su) = (p.var_v.sqrt(), p.var_u_noise.sqrt());
    let mut u = Vec::with_capacity(len);
    let mut v = Vec::with_capacity(len);
    let mut d = Vec::with_capacity(len);
    let mut y = Vec::with_capacity(len);
    for t in 0..len {
        let vt = sv * normal(rng);
        let ut = 0.5 * vt + su * normal(rng);
        let dt = match t {
            0 => p.d1,
            1 => p.d2,
            _ => chaotic2_next(ut, vt, d[t - 1], d[t - 2]),
        };
        u.push(ut);
        v.push(vt);
        d.push(dt);
        y.push(chaotic2_phi(dt) + p.sigma_eta * normal(rng));
    }
    (u, v, d, y)
}

/// One sample `((u_n, v_n), y_n)` per time `n = 3..=n_per_node + 2`.
pub fn gen_chaotic2_stream(k: usize, n_per_node: usize, p: &Chaotic2Params, seed: u64) -> Result<Vec<SampleStream>> {
    check_counts(k, n_per_node)?;
    Ok((0..k)
        .map(|node| {
            let (s, mut rng) = node_rng(seed, node);
            let (u, v, _, y) = chaotic2_series(n_per_node + 2, p, &mut rng);
            let samples = (2..n_per_node + 2).map(|t| Sample { x: vec![u[t], v[t]], y: y[t] }).collect();
            SampleStream::new(node, samples, s)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_expansion_without_noise_is_silent() {
        let p = KernelExpansionParams { k: 3, n_per_node: 50, sigma_eta: 0.0, coeff_std: 0.0, ..Default::default() };
        let (streams, model) = gen_kernel_expansion_stream(&p, 1, 2).unwrap();
        assert!(model.coeffs.iter().all(|a| *a == 0.0));
        assert!(streams.iter().flat_map(|s| &s.samples).all(|s| s.y == 0.0));
    }

    #[test]
    fn kernel_expansion_is_reproducible_and_shared() {
        let p = KernelExpansionParams { k: 2, n_per_node: 10, ..Default::default() };
        let (a, ma) = gen_kernel_expansion_stream(&p, 11, 5).unwrap();
        let (b, mb) = gen_kernel_expansion_stream(&p, 11, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(ma, mb);
        assert_ne!(a[0].samples, a[1].samples);
        assert_eq!(a[0].dim(), Some(5));
        assert!(gen_kernel_expansion_stream(&KernelExpansionParams { k: 0, ..p }, 0, 0).is_err());
    }

    #[test]
    fn quadratic_zero_weights_give_pure_noise() {
        let model = QuadraticModel { w0: vec![0.0; 5], w1: vec![0.0; 5] };
        let a = gen_quadratic_stream_with(&model, 1, 100, 0.05, 3).unwrap();
        let b = gen_quadratic_stream_with(&model, 1, 100, 0.0, 3).unwrap();
        assert!(b[0].samples.iter().all(|s| s.y == 0.0));
        assert!(a[0].samples.iter().all(|s| s.y.abs() < 0.05 * 6.0));
    }

    #[test]
    fn quadratic_second_moment_matches_monte_carlo() {
        let (_, model) = gen_quadratic_stream(1, 1, 4).unwrap();
        let n = 1_000_000;
        let streams = gen_quadratic_stream_with(&model, 1, n, 0.05, 8).unwrap();
        let y2: Vec<f64> = streams[0].samples.iter().map(|s| s.y * s.y).collect();
        let mean = y2.iter().sum::<f64>() / n as f64;
        let var = y2.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        let exact = model.second_moment(0.05);
        assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact} (se {se})");
    }

    #[test]
    fn chaotic1_hand_iteration() {
        let d2 = chaotic1_next(1.0, 0.0);
        let d3 = chaotic1_next(d2, 0.0);
        assert!((d2 - 0.5).abs() < 1e-12);
        assert!((d3 - 0.4).abs() < 1e-12);
        let p = Chaotic1Params { sigma_u: 0.0, sigma_eta: 0.0, ..Default::default() };
        let (_, d, y) = chaotic1_series(3, &p, &mut seeded_rng(0));
        assert_eq!(d, vec![1.0, 0.5, 0.4]);
        assert_eq!(d, y);
    }

    #[test]
    fn chaotic1_stays_bounded() {
        let (_, d, _) = chaotic1_series(100_000, &Chaotic1Params::default(), &mut seeded_rng(1));
        assert!(d.iter().all(|v| v.abs() <= 2.0));
    }

    #[test]
    fn chaotic1_regressor_lags_output() {
        let streams = gen_chaotic1_stream(2, 20, &Chaotic1Params::default(), 6).unwrap();
        for s in &streams {
            assert_eq!(s.len(), 20);
            for w in s.samples.windows(2) {
                assert_eq!(w[1].x, vec![w[0].y]);
            }
        }
        let p = Chaotic1Params { regressor: Chaotic1Regressor::PrevOutputAndInput, ..Default::default() };
        assert_eq!(gen_chaotic1_stream(1, 5, &p, 6).unwrap()[0].dim(), Some(2));
    }

    #[test]
    fn chaotic2_phi_values() {
        assert_eq!(chaotic2_phi(0.0), 0.0);
        assert!((chaotic2_phi(1.0) - 1.0 / 3.0).abs() < 1e-12);
        assert!(chaotic2_phi(1e-8).abs() < 1e-7);
        assert!(chaotic2_phi(-1e-8).abs() < 1e-7);
    }

    #[test]
    fn chaotic2_hand_iteration() {
        let p = Chaotic2Params { var_v: 0.0, var_u_noise: 0.0, sigma_eta: 0.0, ..Default::default() };
        let (_, _, d, y) = chaotic2_series(5, &p, &mut seeded_rng(0));
        let d3 = -0.2 + 0.35;
        let d4 = -0.2 * d3 + 0.35;
        let d5 = -0.2 * d4 + 0.35 * d3;
        for (got, want) in d.iter().zip([1.0, 1.0, d3, d4, d5]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((y[2] - chaotic2_phi(d3)).abs() < 1e-15);
        let s = gen_chaotic2_stream(3, 40, &Chaotic2Params::default(), 1).unwrap();
        assert_eq!(s[2].len(), 40);
        assert_eq!(s[2].dim(), Some(2));
    }
}
