//! Gaussian kernel and its random Fourier feature approximation.
//!
//! A [`FeatureMap`] holds `D` spectral frequencies `ω_i ~ N(0, σ⁻² I_d)` and
//! phases `b_i ~ U[0, 2π)`. It realizes
//!
//! ```text
//! z(x)_i = sqrt(2/D) · cos(ω_i · x + b_i)
//! ```
//!
//! so that `z(x) · z(y)` is an unbiased estimate of
//! `κ(x, y) = exp(-‖x − y‖² / (2σ²))`. Note that `z(x) · z(x)` is not exactly
//! one: it lies in `[0, 2]` and only concentrates at one as `D` grows.
//!
//! Nodes of a network never exchange the map. They share the seed and each
//! one regenerates the same frequencies with [`sample_feature_map`].

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::rng::seeded_rng;

/// Tolerance under which two frequency vectors count as identical.
pub const DISTINCT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    /// Row-major `dim_out × dim_in` frequency matrix.
    omegas: Vec<f64>,
    phases: Vec<f64>,
    sigma: f64,
    dim_in: usize,
    dim_out: usize,
    seed: Option<u64>,
}

/// Draws a feature map for the Gaussian kernel of bandwidth `sigma`.
///
/// Frequencies are drawn first (row by row), then phases, from a ChaCha
/// stream seeded with `seed`; the result is bit-identical across calls.
pub fn sample_feature_map(dim_in: usize, dim_out: usize, sigma: f64, seed: u64) -> Result<FeatureMap> {
    validate_shape(dim_in, dim_out, sigma)?;
    let mut rng = seeded_rng(seed);
    let scale = 1.0 / sigma;
    let omegas: Vec<f64> = (0..dim_in * dim_out)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let phases: Vec<f64> = (0..dim_out)
        .map(|_| {
            let b = TAU * rng.random::<f64>();
            if b >= TAU {
                0.0
            } else {
                b
            }
        })
        .collect();
    let map = FeatureMap { omegas, phases, sigma, dim_in, dim_out, seed: Some(seed) };
    if !map.frequencies_distinct() {
        return Err(Error::Numerical(format!(
            "seed {seed} produced coincident frequencies"
        )));
    }
    Ok(map)
}

fn validate_shape(dim_in: usize, dim_out: usize, sigma: f64) -> Result<()> {
    if dim_in == 0 || dim_out == 0 {
        return Err(Error::param(format!(
            "feature map needs d >= 1 and D >= 1 (got d={dim_in}, D={dim_out})"
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("kernel bandwidth must be positive, got {sigma}")));
    }
    Ok(())
}

impl FeatureMap {
    /// Builds a map from explicit frequencies (one vector per feature) and
    /// phases. Such a map carries no seed and cannot be written as a header.
    pub fn from_parts(omegas: &[Vec<f64>], phases: &[f64], sigma: f64) -> Result<Self> {
        let dim_out = omegas.len();
        let dim_in = omegas.first().map_or(0, Vec::len);
        validate_shape(dim_in, dim_out, sigma)?;
        check_dim("phase count", dim_out, phases.len())?;
        let mut flat = Vec::with_capacity(dim_in * dim_out);
        for w in omegas {
            check_dim("frequency vector", dim_in, w.len())?;
            flat.extend_from_slice(w);
        }
        if let Some(b) = phases.iter().find(|b| !(0.0..TAU).contains(*b)) {
            return Err(Error::param(format!("phase {b} outside [0, 2π)")));
        }
        Ok(FeatureMap {
            omegas: flat,
            phases: phases.to_vec(),
            sigma,
            dim_in,
            dim_out,
            seed: None,
        })
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn omega(&self, i: usize) -> &[f64] {
        &self.omegas[i * self.dim_in..(i + 1) * self.dim_in]
    }

    pub fn phase(&self, i: usize) -> f64 {
        self.phases[i]
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// True when no two frequency vectors are within [`DISTINCT_TOL`].
    ///
    /// Candidates are sorted by first coordinate; a close pair must also be
    /// close in that coordinate, so only short runs need a full comparison.
    pub fn frequencies_distinct(&self) -> bool {
        let mut order: Vec<usize> = (0..self.dim_out).collect();
        order.sort_by(|&a, &b| self.omega(a)[0].total_cmp(&self.omega(b)[0]));
        for (pos, &i) in order.iter().enumerate() {
            let wi = self.omega(i);
            for &j in &order[pos + 1..] {
                let wj = self.omega(j);
                if wj[0] - wi[0] > DISTINCT_TOL {
                    break;
                }
                let d2: f64 = wi.iter().zip(wj).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2.sqrt() <= DISTINCT_TOL {
                    return false;
                }
            }
        }
        true
    }

    /// Maps `x ∈ R^d` to `z(x) ∈ R^D`.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim_out];
        self.transform_into(x, &mut out)?;
        Ok(out)
    }

    /// Allocation-free variant of [`FeatureMap::transform`].
    pub fn transform_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim("transform input", self.dim_in, x.len())?;
        check_dim("transform output", self.dim_out, out.len())?;
        let scale = (2.0 / self.dim_out as f64).sqrt();
        for (i, (o, &b)) in out.iter_mut().zip(&self.phases).enumerate() {
            let w = self.omega(i);
            let arg: f64 = w.iter().zip(x).map(|(wj, xj)| wj * xj).sum::<f64>() + b;
            *o = scale * arg.cos();
        }
        Ok(())
    }

    /// Plain-text header `rff d=<d> D=<D> sigma=<σ> seed=<seed>`.
    ///
    /// Only seeded maps have a header; the frequencies are never stored.
    pub fn header(&self) -> Result<FeatureHeader> {
        let seed = self
            .seed
            .ok_or_else(|| Error::param("feature map built from explicit parts has no seed"))?;
        Ok(FeatureHeader {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            sigma: self.sigma,
            seed,
        })
    }
}

/// Everything needed to regenerate a [`FeatureMap`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureHeader {
    pub dim_in: usize,
    pub dim_out: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl FeatureHeader {
    pub fn build(&self) -> Result<FeatureMap> {
        sample_feature_map(self.dim_in, self.dim_out, self.sigma, self.seed)
    }
}

impl fmt::Display for FeatureHeader {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rff d={} D={} sigma={} seed={}",
            self.dim_in, self.dim_out, self.sigma, self.seed
        )
    }
}

impl FromStr for FeatureHeader {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::Parse { line: 1, message: msg };
        let mut tokens = s.split_whitespace();
        if tokens.next() != Some("rff") {
            return Err(bad("feature header must start with 'rff'".into()));
        }
        let (mut d, mut dd, mut sigma, mut seed) = (None, None, None, None);
        for tok in tokens {
            let (key, value) = tok
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got '{tok}'")))?;
            let num_err = |_| bad(format!("bad value for '{key}': '{value}'"));
            match key {
                "d" => d = Some(value.parse::<usize>().map_err(num_err)?),
                "D" => dd = Some(value.parse::<usize>().map_err(num_err)?),
                "sigma" => sigma = Some(value.parse::<f64>().map_err(|_| bad(format!("bad sigma '{value}'")))?),
                "seed" => seed = Some(value.parse::<u64>().map_err(num_err)?),
                _ => return Err(bad(format!("unknown header key '{key}'"))),
            }
        }
        match (d, dd, sigma, seed) {
            (Some(dim_in), Some(dim_out), Some(sigma), Some(seed)) => {
                Ok(FeatureHeader { dim_in, dim_out, sigma, seed })
            }
            _ => Err(bad("header needs d, D, sigma and seed".into())),
        }
    }
}

/// `exp(-‖x − y‖² / (2σ²))`.
pub fn gaussian_kernel(x: &[f64], y: &[f64], sigma: f64) -> Result<f64> {
    check_dim("kernel argument", x.len(), y.len())?;
    if !(sigma > 0.0) {
        return Err(Error::param(format!("kernel bandwidth must be positive, got {sigma}")));
    }
    Ok(gaussian_kernel_unchecked(x, y, sigma))
}

#[inline]
pub(crate) fn gaussian_kernel_unchecked(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// `z(x) · z(y)`.
pub fn approx_kernel(map: &FeatureMap, x: &[f64], y: &[f64]) -> Result<f64> {
    let zx = map.transform(x)?;
    let zy = map.transform(y)?;
    Ok(dot(&zx, &zy))
}

/// `Σ_m a_m κ(c_m, x)` for the Gaussian kernel.
pub fn kernel_expansion_eval(centers: &[Vec<f64>], coeffs: &[f64], sigma: f64, x: &[f64]) -> Result<f64> {
    if centers.is_empty() || centers.len() != coeffs.len() {
        return Err(Error::param(format!(
            "kernel expansion needs matching non-empty centers/coeffs (got {} and {})",
            centers.len(),
            coeffs.len()
        )));
    }
    let mut acc = 0.0;
    for (c, a) in centers.iter().zip(coeffs) {
        acc += a * gaussian_kernel(c, x, sigma)?;
    }
    Ok(acc)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_feature_map(1, 3, 1.0, 7).unwrap();
        let b = sample_feature_map(1, 3, 1.0, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_feature_map(1, 3, 1.0, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(sample_feature_map(2, 4, 0.0, 0), Err(Error::Parameter(_))));
        assert!(matches!(sample_feature_map(0, 4, 1.0, 0), Err(Error::Parameter(_))));
        assert!(matches!(sample_feature_map(2, 0, 1.0, 0), Err(Error::Parameter(_))));
        assert!(matches!(sample_feature_map(2, 4, -1.0, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn frequency_moments_match_sampling_law() {
        let map = sample_feature_map(5, 100_000, 5.0, 1).unwrap();
        let n = (map.dim_in * map.dim_out) as f64;
        let mean = map.omegas.iter().sum::<f64>() / n;
        let var = map.omegas.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let target_var = 1.0 / 25.0;
        // Standard errors of the sample mean and variance of N(0, 1/25).
        let se_mean = (target_var / n).sqrt();
        let se_var = target_var * (2.0 / (n - 1.0)).sqrt();
        assert!(mean.abs() < 3.0 * se_mean, "mean {mean}");
        assert!((var - target_var).abs() < 3.0 * se_var, "var {var}");
        assert!(map.phases.iter().all(|b| (0.0..TAU).contains(b)));
        assert!(map.frequencies_distinct());
    }

    #[test]
    fn constant_feature() {
        let map = FeatureMap::from_parts(&[vec![0.0]], &[0.0], 1.0).unwrap();
        for x in [-3.0, 0.0, 1.5] {
            assert_eq!(map.transform(&[x]).unwrap(), vec![2f64.sqrt()]);
        }
    }

    #[test]
    fn coincident_frequencies_detected() {
        let map =
            FeatureMap::from_parts(&[vec![0.5, 1.0], vec![0.2, 0.0], vec![0.5, 1.0]], &[0.0, 1.0, 2.0], 1.0)
                .unwrap();
        assert!(!map.frequencies_distinct());
    }

    #[test]
    fn transform_dimension_mismatch() {
        let map = sample_feature_map(3, 4, 1.0, 0).unwrap();
        assert!(matches!(map.transform(&[1.0, 2.0]), Err(Error::Parameter(_))));
    }

    #[test]
    fn kernel_values() {
        let x = [0.3, -1.2];
        assert_eq!(gaussian_kernel(&x, &x, 0.7).unwrap(), 1.0);
        let sigma = 1.7;
        let k = gaussian_kernel(&[0.0], &[sigma * 2f64.sqrt()], sigma).unwrap();
        assert!((k - (-1f64).exp()).abs() < 1e-15);
        assert!((k - 0.367879).abs() < 1e-6);
        let y = [2.0, 0.1];
        assert_eq!(gaussian_kernel(&x, &y, 0.5).unwrap(), gaussian_kernel(&y, &x, 0.5).unwrap());
        assert!(gaussian_kernel(&x, &[1.0], 1.0).is_err());
    }

    #[test]
    fn self_similarity_is_feature_norm() {
        let map = sample_feature_map(2, 50, 1.0, 3).unwrap();
        let x = [0.4, -0.9];
        let z = map.transform(&x).unwrap();
        let v = approx_kernel(&map, &x, &x).unwrap();
        assert_eq!(v, dot(&z, &z));
        assert!((0.0..=2.0).contains(&v));
        assert_ne!(v, 1.0);
    }

    #[test]
    fn expansion_edge_cases() {
        let c = vec![vec![0.2, 0.3]];
        assert_eq!(kernel_expansion_eval(&c, &[1.0], 2.0, &[0.2, 0.3]).unwrap(), 1.0);
        let cs = vec![vec![0.0, 1.0], vec![2.0, -1.0]];
        assert_eq!(kernel_expansion_eval(&cs, &[0.0, 0.0], 1.0, &[0.4, 0.4]).unwrap(), 0.0);
        let twin = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        for x in [[0.0, 0.0], [3.0, -2.0]] {
            assert_eq!(kernel_expansion_eval(&twin, &[1.0, -1.0], 1.0, &x).unwrap(), 0.0);
        }
        assert!(kernel_expansion_eval(&cs, &[1.0], 1.0, &[0.0, 0.0]).is_err());
        assert!(kernel_expansion_eval(&[], &[], 1.0, &[0.0]).is_err());
    }

    #[test]
    fn header_round_trip_rebuilds_map() {
        let map = sample_feature_map(3, 16, 0.7, 99).unwrap();
        let text = map.header().unwrap().to_string();
        let parsed: FeatureHeader = text.parse().unwrap();
        assert_eq!(parsed.build().unwrap(), map);
        assert!("rff d=3 D=16 sigma=0.7".parse::<FeatureHeader>().is_err());
        assert!("nope d=3".parse::<FeatureHeader>().is_err());
        let explicit = FeatureMap::from_parts(&[vec![0.0]], &[0.0], 1.0).unwrap();
        assert!(explicit.header().is_err());
    }

    proptest! {
        #[test]
        fn features_bounded(seed in 0u64..1000, xs in proptest::collection::vec(-10.0f64..10.0, 3)) {
            let map = sample_feature_map(3, 64, 1.3, seed).unwrap();
            let z = map.transform(&xs).unwrap();
            let bound = (2.0 / 64.0f64).sqrt();
            prop_assert!(z.iter().all(|v| v.abs() <= bound + 1e-15));
            prop_assert!(dot(&z, &z).sqrt() <= 2f64.sqrt() + 1e-12);
        }

        #[test]
        fn approx_kernel_symmetric(seed in 0u64..1000,
                                   x in proptest::collection::vec(-2.0f64..2.0, 2),
                                   y in proptest::collection::vec(-2.0f64..2.0, 2)) {
            let map = sample_feature_map(2, 32, 0.8, seed).unwrap();
            prop_assert_eq!(approx_kernel(&map, &x, &y).unwrap(), approx_kernel(&map, &y, &x).unwrap());
        }
    }
}
