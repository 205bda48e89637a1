//! The `analyze` command: stability of a config's network and step size.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rff_dokl::analysis::{mean_convergence_bound, ms_stability_check, rzz_closed_form, BlockMatrix, DEFAULT_MS_CAP};
use rff_dokl::learners::StepSchedule;

use crate::config::{ConfigError, DataSource, ExperimentConfig};
use crate::experiment::{first_realization, RunError, RunSettings};

/// Sample autocorrelation of the transformed inputs over all streams.
fn empirical_rzz(map: &rff_dokl::features::FeatureMap, real: &crate::experiment::Realization) -> Result<DMatrix<f64>, RunError> {
    let d = map.dim_out();
    let mut acc = DMatrix::zeros(d, d);
    let mut count = 0usize;
    for s in &real.streams {
        for sample in &s.samples[..real.horizon] {
            let z = nalgebra::DVector::from_vec(map.transform(&sample.x)?);
            acc.ger(1.0, &z, &z, 1.0);
            count += 1;
        }
    }
    Ok(acc / count as f64)
}

/// Key=value lines: the setup, the mean-convergence bound and the
/// mean-square report for realization 0.
pub fn analyze(cfg: &ExperimentConfig, settings: &RunSettings) -> Result<String, RunError> {
    let mu = match cfg.schedule {
        StepSchedule::Constant { mu } => mu,
        _ => {
            return Err(ConfigError { key: Some("schedule".into()), line: None, message: "analysis needs a constant step".into() }
                .into())
        }
    };
    if !cfg.learner.uses_features() {
        return Err(ConfigError { key: Some("learner".into()), line: None, message: "analysis needs a feature-space learner".into() }
            .into());
    }
    let kd = cfg.k() * cfg.features;
    if kd > DEFAULT_MS_CAP {
        return Err(rff_dokl::Error::Size(format!("K·D = {kd} exceeds the mean-square cap {DEFAULT_MS_CAP}")).into());
    }
    let real = first_realization(cfg, settings)?;
    let map = real.map.as_ref().expect("feature learner");
    let (rzz, source) = match &cfg.data {
        DataSource::KernelExpansion(p) => (rzz_closed_form(map, p.sigma_x)?, "closed_form"),
        _ => (empirical_rzz(map, &real)?, "empirical"),
    };
    let bound = mean_convergence_bound(&rzz)?;
    let k = cfg.k();
    let r_big = BlockMatrix::block_diagonal(&rzz, k)?;
    let a_big = real.combination.matrix().kronecker(&DMatrix::<f64>::identity(cfg.features, cfg.features));
    let report = ms_stability_check(&r_big, &a_big, mu, DEFAULT_MS_CAP)?;
    let mut out = String::new();
    let _ = writeln!(out, "experiment={}", cfg.name);
    let _ = writeln!(out, "K={k}");
    let _ = writeln!(out, "D={}", cfg.features);
    let _ = writeln!(out, "mu={mu}");
    let _ = writeln!(out, "rzz={source}");
    let _ = writeln!(out, "lambda_min={}", bound.eigenvalues[0]);
    let _ = writeln!(out, "lambda_max={}", bound.eigenvalues.last().expect("non-empty"));
    let _ = writeln!(out, "{report}");
    Ok(out)
}
