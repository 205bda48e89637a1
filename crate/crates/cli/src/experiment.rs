//! Realization loop, trace output and the aggregate summary.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use rff_dokl::analysis::{batch_comparator, empirical_regret, rzz_closed_form, steady_state_mse};
use rff_dokl::baselines::{run_klms, run_qklms, Dictionary, Klms};
use rff_dokl::data::{
    gen_chaotic1_stream, gen_chaotic2_stream, gen_kernel_expansion_stream, gen_quadratic_stream_with,
    generate_waveform, load_libsvm, partition_dataset, Dataset, LabelMode, QuadraticModel, SampleStream, TestSet,
};
use rff_dokl::features::{sample_feature_map, FeatureMap};
use rff_dokl::learners::{run_diffusion, run_single, MetricHook, MetricsTrace, RunOptions, StepSchedule, TestErrorHook};
use rff_dokl::network::{metropolis_weights, random_connected_graph, CombinationMatrix, Topology};
use rff_dokl::rng::{derive_seed, tags};

use crate::config::{ConfigError, DataSource, ExperimentConfig, GraphSpec, Learner};

/// Runs stop once the squared error exceeds this.
const DIVERGENCE_GUARD: f64 = 1e100;

/// First iteration at which the regret ratio is measured.
pub const REGRET_BASE: usize = 100;

pub const SUMMARY_HEADER: &str = "experiment,learner,K,D,realizations,metric_name,mean,std";

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    /// Missing or malformed data, or an output that cannot be written.
    Data(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Data(_) => 3,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

/// Library errors raised while running are caused by the configuration,
/// except for I/O and stream exhaustion.
impl From<rff_dokl::Error> for RunError {
    fn from(e: rff_dokl::Error) -> Self {
        use rff_dokl::Error as E;
        match e {
            E::Io(_) | E::Parse { .. } | E::Stream(_) => RunError::Data(e.to_string()),
            other => RunError::Config(ConfigError { key: None, line: None, message: other.to_string() }),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> RunError {
    RunError::Data(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Default)]
pub struct RunSettings {
    /// Directory receiving the traces and `summary.csv`; nothing is written
    /// when unset.
    pub out: Option<PathBuf>,
    /// Base for relative dataset paths.
    pub data_dir: Option<PathBuf>,
}

/// Per-metric values across realizations, in first-seen order.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub experiment: String,
    pub learner: String,
    pub k: usize,
    pub d: usize,
    pub realizations: usize,
    pub metrics: Vec<(String, Vec<f64>)>,
}

impl Summary {
    pub fn values(&self, metric: &str) -> Option<&[f64]> {
        self.metrics.iter().find(|(n, _)| n == metric).map(|(_, v)| v.as_slice())
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.values(metric).map(mean)
    }

    pub fn std(&self, metric: &str) -> Option<f64> {
        self.values(metric).map(sample_std)
    }

    fn push(&mut self, metric: &str, v: f64) {
        match self.metrics.iter_mut().find(|(n, _)| n == metric) {
            Some((_, vals)) => vals.push(v),
            None => self.metrics.push((metric.to_string(), vec![v])),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(SUMMARY_HEADER);
        s.push('\n');
        for (name, vals) in &self.metrics {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                self.experiment,
                self.learner,
                self.k,
                self.d,
                self.realizations,
                name,
                mean(vals),
                sample_std(vals)
            );
        }
        s
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased standard deviation; zero for a single value.
pub fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Data shared by all realizations (loaded files, a generated dataset).
enum Fixed {
    None,
    Split { train: Dataset, test: Dataset },
}

fn resolve(path: &Path, settings: &RunSettings) -> PathBuf {
    match &settings.data_dir {
        Some(base) if path.is_relative() => base.join(path),
        _ => path.to_path_buf(),
    }
}

fn load(path: &Path) -> Result<Dataset, RunError> {
    if !path.exists() {
        return Err(RunError::Data(format!("dataset file {} not found", path.display())));
    }
    load_libsvm(path, LabelMode::Binary).map_err(|e| RunError::Data(format!("{}: {e}", path.display())))
}

fn load_fixed(cfg: &ExperimentConfig, settings: &RunSettings) -> Result<Fixed, RunError> {
    match &cfg.data {
        DataSource::Libsvm { path, test_path, train_size, dim } => {
            let all = load(&resolve(path, settings))?;
            let (mut train, mut test) = match test_path {
                Some(tp) => {
                    let mut train = all;
                    if let Some(n) = train_size {
                        train = train.split_at(*n).map_err(|e| RunError::Data(e.to_string()))?.0;
                    }
                    (train, load(&resolve(tp, settings))?)
                }
                None => all
                    .split_at(train_size.expect("validated at parse time"))
                    .map_err(|e| RunError::Data(e.to_string()))?,
            };
            let d = dim.unwrap_or(0).max(train.dim).max(test.dim);
            train.pad_to(d).map_err(|e| RunError::Data(e.to_string()))?;
            test.pad_to(d).map_err(|e| RunError::Data(e.to_string()))?;
            Ok(Fixed::Split { train, test })
        }
        DataSource::Waveform { train_size, test_size } => {
            let all = generate_waveform(train_size + test_size, derive_seed(cfg.seed, tags::DATA, 0))?;
            let (train, test) = all.split_at(*train_size)?;
            Ok(Fixed::Split { train, test })
        }
        _ => Ok(Fixed::None),
    }
}

/// One realization's inputs.
pub struct Realization {
    pub streams: Vec<SampleStream>,
    pub test: Option<TestSet>,
    pub map: Option<FeatureMap>,
    pub combination: CombinationMatrix,
    pub horizon: usize,
}

fn build_graph(spec: GraphSpec, seed: u64) -> Result<CombinationMatrix, RunError> {
    Ok(match spec {
        GraphSpec::Random { k, p_attach } => metropolis_weights(&random_connected_graph(k, p_attach, seed)?),
        GraphSpec::Complete { k } => metropolis_weights(&Topology::complete(k)?),
        GraphSpec::Identity { k } => CombinationMatrix::identity(k),
    })
}

fn build_realization(cfg: &ExperimentConfig, fixed: &Fixed, r: usize) -> Result<Realization, RunError> {
    let rs = derive_seed(cfg.seed, tags::REALIZATION, r as u64);
    let data_seed = derive_seed(rs, tags::DATA, 0);
    let k = cfg.k();
    let (streams, test) = match (&cfg.data, fixed) {
        (DataSource::KernelExpansion(p), _) => {
            let p = rff_dokl::data::KernelExpansionParams { k, ..*p };
            (gen_kernel_expansion_stream(&p, derive_seed(rs, tags::MODEL, 0), data_seed)?.0, None)
        }
        (DataSource::Quadratic { d, n_per_node, sigma_eta }, _) => {
            let model = QuadraticModel::sample(*d, derive_seed(rs, tags::MODEL, 0));
            (gen_quadratic_stream_with(&model, k, *n_per_node, *sigma_eta, data_seed)?, None)
        }
        (DataSource::Chaotic1 { n_per_node, params }, _) => (gen_chaotic1_stream(k, *n_per_node, params, data_seed)?, None),
        (DataSource::Chaotic2 { n_per_node, params }, _) => (gen_chaotic2_stream(k, *n_per_node, params, data_seed)?, None),
        (_, Fixed::Split { train, test }) => {
            (partition_dataset(train, k, derive_seed(rs, tags::PARTITION, 0))?, Some(TestSet::from_dataset(test)))
        }
        (_, Fixed::None) => unreachable!("dataset sources are loaded up front"),
    };
    let shortest = streams.iter().map(SampleStream::len).min().unwrap_or(0);
    let horizon = cfg.horizon.unwrap_or(shortest);
    if horizon > shortest || horizon == 0 {
        return Err(RunError::Data(format!("horizon {horizon} exceeds the {shortest} samples per node")));
    }
    let dim_in = streams[0].dim().unwrap_or(0);
    let map = if cfg.learner.uses_features() {
        Some(sample_feature_map(dim_in, cfg.features, cfg.sigma, derive_seed(rs, tags::FEATURES, 0))?)
    } else {
        None
    };
    let combination = build_graph(cfg.graph, derive_seed(rs, tags::GRAPH, 0))?;
    Ok(Realization { streams, test, map, combination, horizon })
}

/// Mean of the recorded MSE over the trailing `fraction` of the run;
/// infinite when the run diverged.
pub fn steady_mse(trace: &MetricsTrace, fraction: f64) -> f64 {
    if trace.diverged_at.is_some() {
        return f64::INFINITY;
    }
    let start = ((1.0 - fraction) * trace.iterations as f64).floor() as usize;
    let tail: Vec<f64> = trace.rows.iter().filter(|r| r.iteration > start).map(|r| r.network_mse).collect();
    if tail.is_empty() {
        trace.last().map_or(f64::NAN, |r| r.network_mse)
    } else {
        mean(&tail)
    }
}

/// `max_{N ≥ N₀} (S_N/√N) / (S_{N₀}/√N₀)` with `N₀ =` [`REGRET_BASE`].
pub fn regret_ratio(cumulative: &[f64]) -> Option<f64> {
    if cumulative.len() < REGRET_BASE {
        return None;
    }
    let scaled = |n: usize| cumulative[n - 1] / (n as f64).sqrt();
    let base = scaled(REGRET_BASE);
    let peak = (REGRET_BASE..=cumulative.len()).map(scaled).fold(f64::NEG_INFINITY, f64::max);
    Some(peak / base)
}

fn run_options(cfg: &ExperimentConfig, horizon: usize) -> RunOptions {
    let mut opts = RunOptions::new(cfg.loss, cfg.schedule, horizon);
    opts.epochs = cfg.epochs;
    opts.cadence = cfg.cadence;
    opts.track_disagreement = cfg.track_disagreement;
    opts.track_psi_losses = cfg.track_regret;
    opts.divergence_limit = Some(DIVERGENCE_GUARD);
    opts
}

fn constant_mu(cfg: &ExperimentConfig) -> Result<f64, RunError> {
    match cfg.schedule {
        StepSchedule::Constant { mu } => Ok(mu),
        _ => Err(ConfigError { key: Some("schedule".into()), line: None, message: "a constant step is required".into() }.into()),
    }
}

/// Trace of the configured learner on `a` (the realization's own graph or
/// the identity for the non-cooperative comparison).
fn run_learner(
    cfg: &ExperimentConfig,
    real: &Realization,
    a: &CombinationMatrix,
) -> Result<MetricsTrace, RunError> {
    let opts = run_options(cfg, real.horizon);
    let mut hook = match (&real.test, &real.map) {
        (Some(t), Some(map)) => Some(TestErrorHook::new(map, t.clone())?),
        _ => None,
    };
    let hooks: Vec<&mut dyn MetricHook> = hook.iter_mut().map(|h| h as &mut dyn MetricHook).collect();
    let trace = match cfg.learner {
        Learner::Dklms | Learner::Pegasos => {
            run_diffusion(real.map.as_ref().expect("feature learner"), a, &real.streams, &opts, hooks)?
        }
        Learner::RffOkl => run_single(real.map.as_ref().expect("feature learner"), &real.streams[0], &opts, hooks)?,
        Learner::Qklms => {
            let mut dict = Dictionary::with_metric(cfg.sigma, cfg.q.expect("validated"), cfg.quantization)?;
            run_qklms(&real.streams[0], &mut dict, constant_mu(cfg)?, real.horizon, cfg.cadence)?
        }
        Learner::Klms => {
            let mut klms = Klms::new(cfg.sigma, constant_mu(cfg)?)?;
            run_klms(&real.streams[0], &mut klms, real.horizon, cfg.cadence)?
        }
    };
    Ok(trace)
}

fn last_extra(trace: &MetricsTrace, name: &str) -> Option<f64> {
    trace.extra(name)?.into_iter().rev().flatten().next()
}

/// Headline metrics of one trace, keyed with `suffix`.
fn record(cfg: &ExperimentConfig, trace: &MetricsTrace, suffix: &str, summary: &mut Summary) {
    if cfg.data.is_classification() {
        summary.push(&format!("test_error{suffix}"), trace.final_test_error().unwrap_or(f64::NAN));
    } else {
        let mse = steady_mse(trace, cfg.steady_fraction);
        summary.push(&format!("steady_mse{suffix}"), mse);
        summary.push(&format!("steady_mse_db{suffix}"), 10.0 * mse.log10());
    }
    if cfg.track_disagreement {
        let last = trace.rows.iter().rev().find_map(|r| r.disagreement);
        summary.push(&format!("final_disagreement{suffix}"), last.unwrap_or(f64::NAN));
    }
    if let Some(size) = last_extra(trace, "dict_size") {
        summary.push(&format!("dict_size{suffix}"), size);
    }
    if !cfg.data.is_classification() {
        summary.push(&format!("diverged{suffix}"), if trace.diverged_at.is_some() { 1.0 } else { 0.0 });
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), RunError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_err(&path, e))
}

/// Runs every realization of `cfg`. With an output directory, writes
/// `trace_r<r>.csv` (plus `_noncoop` and `_qklms` variants) per
/// realization and `summary.csv`.
pub fn run_experiment(cfg: &ExperimentConfig, settings: &RunSettings) -> Result<Summary, RunError> {
    let fixed = load_fixed(cfg, settings)?;
    if let Some(dir) = &settings.out {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut summary = Summary {
        experiment: cfg.name.clone(),
        learner: cfg.learner.name().to_string(),
        k: cfg.k(),
        d: cfg.features,
        realizations: cfg.realizations,
        metrics: Vec::new(),
    };
    for r in 0..cfg.realizations {
        let real = build_realization(cfg, &fixed, r)?;
        let mut trace = run_learner(cfg, &real, &real.combination)?;
        record(cfg, &trace, "", &mut summary);
        if cfg.track_regret {
            let map = real.map.as_ref().expect("feature learner");
            let g = batch_comparator(map, &real.streams, real.horizon, &cfg.loss, trace.max_theta_norm)?;
            let losses = trace.psi_losses.as_deref().expect("losses tracked");
            let s = empirical_regret(losses, &g, map, &real.streams, real.horizon, &cfg.loss)?;
            summary.push("regret_ratio", regret_ratio(&s).unwrap_or(f64::NAN));
            summary.push("regret_at_base", s.get(REGRET_BASE - 1).copied().unwrap_or(f64::NAN));
            summary.push("final_regret", *s.last().expect("non-empty run"));
            trace.set_regret(&s);
        }
        if cfg.predict_mse {
            if let DataSource::KernelExpansion(p) = &cfg.data {
                let rzz = rzz_closed_form(real.map.as_ref().expect("feature learner"), p.sigma_x)?;
                let pred = steady_state_mse(&rzz, constant_mu(cfg)?, p.sigma_eta, None)?.mse;
                summary.push("predicted_mse", pred);
                summary.push("predicted_mse_db", 10.0 * pred.log10());
            }
        }
        if let Some(dir) = &settings.out {
            write_file(dir, &format!("trace_r{r}.csv"), &trace.to_csv())?;
        }
        if cfg.compare_noncooperative {
            let nc = run_learner(cfg, &real, &CombinationMatrix::identity(cfg.k()))?;
            record(cfg, &nc, "_noncoop", &mut summary);
            if let Some(dir) = &settings.out {
                write_file(dir, &format!("trace_r{r}_noncoop.csv"), &nc.to_csv())?;
            }
        }
        if cfg.compare_qklms {
            let mut dict = Dictionary::with_metric(cfg.sigma, cfg.q.expect("validated"), cfg.quantization)?;
            let qt = run_qklms(&real.streams[0], &mut dict, constant_mu(cfg)?, real.horizon, cfg.cadence)?;
            let mse = steady_mse(&qt, cfg.steady_fraction);
            summary.push("qklms_steady_mse", mse);
            summary.push("qklms_steady_mse_db", 10.0 * mse.log10());
            summary.push("qklms_dict_size", dict.len() as f64);
            if let Some(dir) = &settings.out {
                write_file(dir, &format!("trace_r{r}_qklms.csv"), &qt.to_csv())?;
            }
        }
    }
    if let Some(dir) = &settings.out {
        write_file(dir, "summary.csv", &summary.to_csv())?;
    }
    Ok(summary)
}

/// Realization 0 of `cfg`, for analysis.
pub fn first_realization(cfg: &ExperimentConfig, settings: &RunSettings) -> Result<Realization, RunError> {
    let fixed = load_fixed(cfg, settings)?;
    build_realization(cfg, &fixed, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistics() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(sample_std(&[1.0, 2.0, 3.0]), 1.0);
        assert_eq!(sample_std(&[5.0]), 0.0);
    }

    #[test]
    fn regret_ratio_cases() {
        let flat: Vec<f64> = (1..=400).map(|n| (n as f64).sqrt()).collect();
        assert!((regret_ratio(&flat).unwrap() - 1.0).abs() < 1e-12);
        let linear: Vec<f64> = (1..=400).map(|n| n as f64).collect();
        assert!((regret_ratio(&linear).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(regret_ratio(&linear[..50]), None);
    }

    #[test]
    fn summary_rows_in_first_seen_order() {
        let mut s = Summary {
            experiment: "e".into(),
            learner: "dklms".into(),
            k: 2,
            d: 3,
            realizations: 2,
            metrics: vec![],
        };
        s.push("b", 1.0);
        s.push("a", 2.0);
        s.push("b", 3.0);
        assert_eq!(s.to_csv(), format!("{SUMMARY_HEADER}\ne,dklms,2,3,2,b,2,1.4142135623730951\ne,dklms,2,3,2,a,2,0\n"));
        assert_eq!(s.mean("a"), Some(2.0));
        assert_eq!(s.values("zzz"), None);
    }
}
