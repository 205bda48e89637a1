//! Networkwise regret against a fixed comparator.

use crate::data::SampleStream;
use crate::error::{check_dim, Error, Result};
use crate::features::{dot, FeatureMap};
use crate::losses::Loss;

/// Iterations of the batch comparator solve.
pub const COMPARATOR_ITERS: usize = 200;

/// Transformed samples of all nodes, row-major.
struct Batch {
    z: Vec<f64>,
    y: Vec<f64>,
    dim: usize,
}

impl Batch {
    fn new(map: &FeatureMap, streams: &[SampleStream], horizon: usize) -> Result<Self> {
        let dim = map.dim_out();
        let mut z = Vec::with_capacity(streams.len() * horizon * dim);
        let mut y = Vec::with_capacity(streams.len() * horizon);
        let mut buf = vec![0.0; dim];
        for s in streams {
            if s.len() < horizon {
                return Err(Error::Stream(format!("node {} has fewer than {horizon} samples", s.node_id)));
            }
            for sample in &s.samples[..horizon] {
                map.transform_into(&sample.x, &mut buf)?;
                z.extend_from_slice(&buf);
                y.push(sample.y);
            }
        }
        Ok(Batch { z, y, dim })
    }

    fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.z.chunks(self.dim).zip(self.y.iter().copied())
    }

    /// Mean loss and mean (sub)gradient at `g`.
    fn objective(&self, loss: &Loss, g: &[f64], grad: Option<&mut Vec<f64>>) -> f64 {
        let n = self.y.len() as f64;
        let mut value = 0.0;
        let mut gsum = grad;
        if let Some(gv) = gsum.as_deref_mut() {
            gv.iter_mut().for_each(|v| *v = 0.0);
        }
        let reg = match *loss {
            Loss::Hinge { lambda } => lambda,
            Loss::Squared => 0.0,
        };
        for (z, y) in self.rows() {
            let pred = dot(g, z);
            let coef = match loss {
                Loss::Squared => {
                    value += 0.5 * (y - pred) * (y - pred);
                    -(y - pred)
                }
                Loss::Hinge { .. } => {
                    let slack = 1.0 - y * pred;
                    if slack > 0.0 {
                        value += slack;
                        -y
                    } else {
                        0.0
                    }
                }
            };
            if coef != 0.0 {
                if let Some(gv) = gsum.as_deref_mut() {
                    for (a, b) in gv.iter_mut().zip(z) {
                        *a += coef * b;
                    }
                }
            }
        }
        if let Some(gv) = gsum {
            for (a, t) in gv.iter_mut().zip(g) {
                *a = *a / n + reg * t;
            }
        }
        value / n + 0.5 * reg * dot(g, g)
    }
}

fn project_to_ball(g: &mut [f64], radius: f64) {
    let n = dot(g, g).sqrt();
    if n > radius {
        g.iter_mut().for_each(|v| *v *= radius / n);
    }
}

/// Batch minimizer of the mean loss over the first `horizon` samples of all
/// streams, by projected (sub)gradient descent with Armijo backtracking, kept
/// inside the ball of the given radius.
pub fn batch_comparator(
    map: &FeatureMap,
    streams: &[SampleStream],
    horizon: usize,
    loss: &Loss,
    radius: f64,
) -> Result<Vec<f64>> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::param(format!("comparator radius must be finite and nonnegative, got {radius}")));
    }
    let batch = Batch::new(map, streams, horizon)?;
    let dim = batch.dim;
    let mut g = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let mut step = 1.0;
    let mut f = batch.objective(loss, &g, Some(&mut grad));
    let mut best = (f, g.clone());
    for _ in 0..COMPARATOR_ITERS {
        let gn2 = dot(&grad, &grad);
        if gn2 == 0.0 {
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let mut cand: Vec<f64> = g.iter().zip(&grad).map(|(a, b)| a - step * b).collect();
            project_to_ball(&mut cand, radius);
            let fc = batch.objective(loss, &cand, None);
            let moved: f64 = cand.iter().zip(&g).map(|(a, b)| (a - b) * (a - b)).sum();
            if fc <= f - 0.5 * moved / step {
                g = cand;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        f = batch.objective(loss, &g, Some(&mut grad));
        if f < best.0 {
            best = (f, g.clone());
        }
        step *= 2.0;
    }
    Ok(best.1)
}

/// Partial sums `S_N = Σ_{i ≤ N} Σ_k (L(ψ_{k,i}) − L(g))` for `N = 1..`.
///
/// `psi_losses` is iteration-major (`i·K + k`), as recorded by the diffusion
/// engine; sample `i` of node `k` is `((i − 1) mod horizon) + 1`.
pub fn empirical_regret(
    psi_losses: &[f64],
    comparator: &[f64],
    map: &FeatureMap,
    streams: &[SampleStream],
    horizon: usize,
    loss: &Loss,
) -> Result<Vec<f64>> {
    let k = streams.len();
    if k == 0 || horizon == 0 {
        return Err(Error::param("regret needs at least one stream and horizon >= 1"));
    }
    check_dim("comparator", map.dim_out(), comparator.len())?;
    if psi_losses.is_empty() || !psi_losses.len().is_multiple_of(k) {
        return Err(Error::param(format!(
            "{} loss records do not cover whole iterations of {k} nodes",
            psi_losses.len()
        )));
    }
    let iterations = psi_losses.len() / k;
    // The comparator's loss depends only on the sample, so one pass suffices.
    let mut z = vec![0.0; map.dim_out()];
    let mut comp = vec![0.0; horizon * k];
    for (node, s) in streams.iter().enumerate() {
        if s.len() < horizon {
            return Err(Error::Stream(format!("node {} has fewer than {horizon} samples", s.node_id)));
        }
        for (i, sample) in s.samples[..horizon].iter().enumerate() {
            map.transform_into(&sample.x, &mut z)?;
            comp[i * k + node] = loss.value(&z, sample.y, comparator)?;
        }
    }
    let mut acc = 0.0;
    Ok((0..iterations)
        .map(|i| {
            let base = (i % horizon) * k;
            for node in 0..k {
                acc += psi_losses[i * k + node] - comp[base + node];
            }
            acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;
    use crate::features::sample_feature_map;
    use crate::learners::{run_diffusion, RunOptions, StepSchedule};
    use crate::network::{metropolis_weights, random_connected_graph};
    use rand::Rng;

    fn planted(map: &FeatureMap, k: usize, n: usize, seed: u64) -> (Vec<SampleStream>, Vec<f64>) {
        let mut rng = crate::rng::seeded_rng(seed);
        let theta: Vec<f64> = (0..map.dim_out()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let streams = (0..k)
            .map(|node| {
                let samples = (0..n)
                    .map(|_| {
                        let x: Vec<f64> = (0..map.dim_in()).map(|_| rng.random_range(-2.0..2.0)).collect();
                        let y = dot(&theta, &map.transform(&x).unwrap());
                        Sample::new(x, y)
                    })
                    .collect();
                SampleStream::new(node, samples, 0)
            })
            .collect();
        (streams, theta)
    }

    #[test]
    fn average_regret_vanishes_on_realizable_data() {
        let map = sample_feature_map(2, 10, 1.0, 1).unwrap();
        let (streams, _) = planted(&map, 3, 4000, 2);
        let a = metropolis_weights(&random_connected_graph(3, 0.8, 3).unwrap());
        let mut opts = RunOptions::new(Loss::Squared, StepSchedule::Constant { mu: 0.5 }, 4000);
        opts.track_psi_losses = true;
        let t = run_diffusion(&map, &a, &streams, &opts, vec![]).unwrap();
        let g = t.final_state.mean();
        let s = empirical_regret(t.psi_losses.as_ref().unwrap(), &g, &map, &streams, 4000, &Loss::Squared).unwrap();
        let ratio = |n: usize| s[n - 1] / n as f64;
        assert!(ratio(4000) < 0.1 * ratio(100));
        assert!(ratio(4000).abs() < 1e-2);
    }

    #[test]
    fn hinge_at_origin_costs_one_per_term() {
        let map = sample_feature_map(2, 6, 1.0, 4).unwrap();
        let streams: Vec<SampleStream> = (0..2)
            .map(|k| SampleStream::new(k, vec![Sample::new(vec![0.1, 0.2], 1.0), Sample::new(vec![0.3, -0.2], -1.0)], 0))
            .collect();
        let losses = [0.5, 0.25, 2.0, 1.0];
        let s = empirical_regret(&losses, &[0.0; 6], &map, &streams, 2, &Loss::Hinge { lambda: 0.1 }).unwrap();
        assert_eq!(s, vec![0.75 - 2.0, 3.75 - 4.0]);
        assert!(empirical_regret(&losses[..3], &[0.0; 6], &map, &streams, 2, &Loss::Squared).is_err());
        assert!(empirical_regret(&losses, &[0.0; 5], &map, &streams, 2, &Loss::Squared).is_err());
    }

    #[test]
    fn comparator_descends_and_respects_radius() {
        let map = sample_feature_map(2, 10, 1.0, 5).unwrap();
        let (streams, theta) = planted(&map, 2, 300, 6);
        let batch = Batch::new(&map, &streams, 300).unwrap();
        let g = batch_comparator(&map, &streams, 300, &Loss::Squared, 100.0).unwrap();
        let zero = vec![0.0; 10];
        assert!(batch.objective(&Loss::Squared, &g, None) < 0.2 * batch.objective(&Loss::Squared, &zero, None));
        let small = batch_comparator(&map, &streams, 300, &Loss::Squared, 0.1).unwrap();
        assert!(dot(&small, &small).sqrt() <= 0.1 + 1e-12);
        assert!(dot(&theta, &theta) > 0.0);
    }
}
