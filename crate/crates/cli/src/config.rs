//! Flat `key = value` experiment configs.
//!
//! Blank lines and `#` comments are ignored; generator and comparison
//! parameters use dotted keys (`data.sigma_eta = 0.1`). Numbers may be
//! written as simple fractions (`lambda = 1/316`). Unknown keys are
//! rejected so that a typo never silently falls back to a default.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use rff_dokl::baselines::QuantizationMetric;
use rff_dokl::data::{Chaotic1Params, Chaotic1Regressor, Chaotic2Params, KernelExpansionParams};
use rff_dokl::learners::StepSchedule;
use rff_dokl::losses::Loss;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at_key(key: &str, message: impl Into<String>) -> Self {
        ConfigError { key: Some(key.to_string()), line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.key) {
            (Some(l), Some(k)) => write!(f, "line {l}, key `{k}`: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "key `{k}`: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Learner {
    Dklms,
    Pegasos,
    RffOkl,
    Qklms,
    Klms,
}

impl Learner {
    pub fn name(&self) -> &'static str {
        match self {
            Learner::Dklms => "dklms",
            Learner::Pegasos => "pegasos",
            Learner::RffOkl => "rff_okl",
            Learner::Qklms => "qklms",
            Learner::Klms => "klms",
        }
    }

    /// Learners that run on a single node.
    pub fn is_single_node(&self) -> bool {
        matches!(self, Learner::RffOkl | Learner::Qklms | Learner::Klms)
    }

    /// Learners that operate on random Fourier features.
    pub fn uses_features(&self) -> bool {
        matches!(self, Learner::Dklms | Learner::Pegasos | Learner::RffOkl)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphSpec {
    Random { k: usize, p_attach: f64 },
    Complete { k: usize },
    /// No cooperation: `A = I_K`.
    Identity { k: usize },
}

impl GraphSpec {
    pub fn k(&self) -> usize {
        match *self {
            GraphSpec::Random { k, .. } | GraphSpec::Complete { k } | GraphSpec::Identity { k } => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    KernelExpansion(KernelExpansionParams),
    Quadratic { d: usize, n_per_node: usize, sigma_eta: f64 },
    Chaotic1 { n_per_node: usize, params: Chaotic1Params },
    Chaotic2 { n_per_node: usize, params: Chaotic2Params },
    /// Breiman's three-class waveform generator, classes 0 vs 1.
    Waveform { train_size: usize, test_size: usize },
    Libsvm { path: PathBuf, test_path: Option<PathBuf>, train_size: Option<usize>, dim: Option<usize> },
}

impl DataSource {
    pub fn name(&self) -> &'static str {
        match self {
            DataSource::KernelExpansion(_) => "kernel_expansion",
            DataSource::Quadratic { .. } => "quadratic",
            DataSource::Chaotic1 { .. } => "chaotic1",
            DataSource::Chaotic2 { .. } => "chaotic2",
            DataSource::Waveform { .. } => "waveform",
            DataSource::Libsvm { .. } => "libsvm",
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(self, DataSource::Waveform { .. } | DataSource::Libsvm { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub learner: Learner,
    pub graph: GraphSpec,
    pub sigma: f64,
    /// Number of random features `D`.
    pub features: usize,
    pub loss: Loss,
    pub schedule: StepSchedule,
    pub data: DataSource,
    /// Samples per node per epoch; defaults to the stream length.
    pub horizon: Option<usize>,
    pub epochs: usize,
    pub realizations: usize,
    pub seed: u64,
    pub cadence: Option<usize>,
    /// Trailing fraction of the run averaged into the steady-state MSE.
    pub steady_fraction: f64,
    pub track_disagreement: bool,
    pub track_regret: bool,
    /// QKLMS quantization size (learner `qklms` or `compare.qklms_q`).
    pub q: Option<f64>,
    pub quantization: QuantizationMetric,
    pub compare_noncooperative: bool,
    pub compare_qklms: bool,
    /// Also report the analytic steady-state MSE for Gaussian-input data.
    pub predict_mse: bool,
    pub output: Option<PathBuf>,
}

/// Raw `key → (line, value)` pairs.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, (usize, String)>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| ConfigError {
            key: None,
            line: Some(line),
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigError { key: Some(k.to_string()), line: Some(line), message: "empty key or value".into() });
        }
        if out.insert(k.to_string(), (line, v.to_string())).is_some() {
            return Err(ConfigError { key: Some(k.to_string()), line: Some(line), message: "duplicate key".into() });
        }
    }
    Ok(out)
}

/// Parses a float, accepting `a/b` fractions.
pub fn parse_number(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b) = (a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?);
            (b != 0.0).then(|| a / b)
        }
        None => s.parse().ok(),
    }
}

struct Reader {
    pairs: BTreeMap<String, (usize, String)>,
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.pairs.remove(key)
    }

    fn err(key: &str, line: usize, message: impl Into<String>) -> ConfigError {
        ConfigError { key: Some(key.to_string()), line: Some(line), message: message.into() }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        self.take(key).map(|(_, v)| v)
    }

    fn required(&mut self, key: &str) -> Result<(usize, String), ConfigError> {
        self.take(key).ok_or_else(|| ConfigError::at_key(key, "missing required key"))
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => {
                let x = parse_number(&v).ok_or_else(|| Self::err(key, line, format!("`{v}` is not a number")))?;
                if !x.is_finite() {
                    return Err(Self::err(key, line, "value must be finite"));
                }
                Ok(Some(x))
            }
        }
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Self::err(key, line, format!("`{v}` is not a nonnegative integer"))),
        }
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.usize(key)?.unwrap_or(default))
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some((line, v)) => match v.as_str() {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(Self::err(key, line, format!("`{v}` is not a boolean"))),
            },
        }
    }
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::at_key(key, format!("must be positive, got {v}")))
    }
}

fn at_least_one(key: &str, v: usize) -> Result<usize, ConfigError> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(ConfigError::at_key(key, "must be at least 1"))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut r = Reader { pairs: parse_pairs(text)? };
        let (_, name) = r.required("name")?;
        let (line, learner_s) = r.required("learner")?;
        let learner = match learner_s.as_str() {
            "dklms" => Learner::Dklms,
            "pegasos" => Learner::Pegasos,
            "rff_okl" => Learner::RffOkl,
            "qklms" => Learner::Qklms,
            "klms" => Learner::Klms,
            other => return Err(Reader::err("learner", line, format!("unknown learner `{other}`"))),
        };

        let k = at_least_one("graph.k", r.usize_or("graph.k", 1)?)?;
        let graph = match r.string("graph").as_deref().unwrap_or(if k == 1 { "identity" } else { "random" }) {
            "random" => {
                let p = r.f64_or("graph.p_attach", 0.2)?;
                if !(p > 0.0 && p <= 1.0) {
                    return Err(ConfigError::at_key("graph.p_attach", format!("must lie in (0, 1], got {p}")));
                }
                GraphSpec::Random { k, p_attach: p }
            }
            "complete" => GraphSpec::Complete { k },
            "identity" => GraphSpec::Identity { k },
            other => return Err(ConfigError::at_key("graph", format!("unknown graph `{other}`"))),
        };
        if learner.is_single_node() && k != 1 {
            return Err(ConfigError::at_key("graph.k", format!("learner `{}` runs on a single node", learner.name())));
        }

        let sigma = positive("sigma", r.f64("sigma")?.ok_or_else(|| ConfigError::at_key("sigma", "missing required key"))?)?;
        let features = r.usize_or("features", 0)?;
        if learner.uses_features() && features == 0 {
            return Err(ConfigError::at_key("features", "missing or zero feature count"));
        }
        let lambda = r.f64("lambda")?;
        let mu = r.f64("mu")?;

        let loss_s = r.string("loss").unwrap_or_else(|| if learner == Learner::Pegasos { "hinge".into() } else { "squared".into() });
        let loss = match loss_s.as_str() {
            "squared" => Loss::Squared,
            "hinge" => {
                let l = positive("lambda", lambda.ok_or_else(|| ConfigError::at_key("lambda", "hinge loss needs lambda"))?)?;
                Loss::Hinge { lambda: l }
            }
            other => return Err(ConfigError::at_key("loss", format!("unknown loss `{other}`"))),
        };
        match (learner, loss) {
            (Learner::Pegasos, Loss::Hinge { .. }) => {}
            (Learner::Pegasos, _) => return Err(ConfigError::at_key("loss", "learner `pegasos` needs the hinge loss")),
            (_, Loss::Squared) => {}
            (l, _) => {
                return Err(ConfigError::at_key("loss", format!("learner `{}` needs the squared loss", l.name())));
            }
        }

        let default_schedule = if learner == Learner::Pegasos { "pegasos" } else { "constant" };
        let schedule = match r.string("schedule").as_deref().unwrap_or(default_schedule) {
            "constant" => StepSchedule::Constant { mu: positive("mu", mu.unwrap_or(1.0))? },
            "inverse_sqrt" => StepSchedule::InverseSqrt { mu: positive("mu", mu.unwrap_or(1.0))? },
            "pegasos" => StepSchedule::Pegasos {
                lambda: positive("lambda", lambda.ok_or_else(|| ConfigError::at_key("lambda", "pegasos schedule needs lambda"))?)?,
            },
            other => return Err(ConfigError::at_key("schedule", format!("unknown schedule `{other}`"))),
        };

        if matches!(learner, Learner::Qklms | Learner::Klms) && !matches!(schedule, StepSchedule::Constant { .. }) {
            return Err(ConfigError::at_key("schedule", format!("learner `{}` needs a constant step", learner.name())));
        }
        let data = parse_data(&mut r, k, sigma)?;
        if learner == Learner::Pegasos && !data.is_classification() {
            return Err(ConfigError::at_key("data", "learner `pegasos` needs a classification data source"));
        }
        if learner != Learner::Pegasos && data.is_classification() {
            return Err(ConfigError::at_key("data", format!("learner `{}` needs a regression data source", learner.name())));
        }

        let horizon = r.usize("horizon")?.map(|h| at_least_one("horizon", h)).transpose()?;
        let epochs = at_least_one("epochs", r.usize_or("epochs", 1)?)?;
        let realizations = at_least_one("realizations", r.usize_or("realizations", 20)?)?;
        let seed = match r.take("seed") {
            None => 1,
            Some((line, v)) => v.parse().map_err(|_| Reader::err("seed", line, format!("`{v}` is not a u64")))?,
        };
        let cadence = r.usize("cadence")?.map(|c| at_least_one("cadence", c)).transpose()?;
        let steady_fraction = r.f64_or("steady_fraction", 0.1)?;
        if !(steady_fraction > 0.0 && steady_fraction <= 1.0) {
            return Err(ConfigError::at_key("steady_fraction", "must lie in (0, 1]"));
        }
        let track_disagreement = r.bool_or("track_disagreement", false)?;
        let track_regret = r.bool_or("track_regret", false)?;
        let compare_noncooperative = r.bool_or("compare.noncooperative", false)?;
        let compare_q = r.f64("compare.qklms_q")?;
        let q = match learner {
            Learner::Qklms => {
                Some(r.f64("q")?.ok_or_else(|| ConfigError::at_key("q", "learner `qklms` needs a quantization size"))?)
            }
            _ => compare_q,
        };
        if let Some(q) = q {
            if q < 0.0 {
                return Err(ConfigError::at_key("q", "quantization size must be nonnegative"));
            }
        }
        let quantization = match r.string("quantization").as_deref().unwrap_or("squared_distance") {
            "squared_distance" => QuantizationMetric::SquaredDistance,
            "distance" => QuantizationMetric::Distance,
            other => return Err(ConfigError::at_key("quantization", format!("unknown metric `{other}`"))),
        };
        if compare_q.is_some() && learner != Learner::RffOkl {
            return Err(ConfigError::at_key("compare.qklms_q", "the QKLMS comparison needs learner `rff_okl`"));
        }
        if compare_noncooperative && (learner.is_single_node() || matches!(graph, GraphSpec::Identity { .. })) {
            return Err(ConfigError::at_key("compare.noncooperative", "needs a cooperative multi-node graph"));
        }
        if track_regret && !learner.uses_features() {
            return Err(ConfigError::at_key("track_regret", "regret needs a feature-space learner"));
        }
        let predict_mse = r.bool_or("predict_mse", false)?;
        if predict_mse && !(learner == Learner::RffOkl && matches!(data, DataSource::KernelExpansion(_))) {
            return Err(ConfigError::at_key("predict_mse", "prediction needs learner `rff_okl` on kernel_expansion data"));
        }
        let output = r.string("output").map(PathBuf::from);

        if let Some((key, (line, _))) = r.pairs.into_iter().next() {
            return Err(ConfigError { key: Some(key), line: Some(line), message: "unknown key".into() });
        }
        Ok(ExperimentConfig {
            name,
            learner,
            graph,
            sigma,
            features,
            loss,
            schedule,
            data,
            horizon,
            epochs,
            realizations,
            seed,
            cadence,
            steady_fraction,
            track_disagreement,
            track_regret,
            q: if learner == Learner::Qklms || compare_q.is_some() { q } else { None },
            quantization,
            compare_noncooperative,
            compare_qklms: compare_q.is_some(),
            predict_mse,
            output,
        })
    }

    pub fn k(&self) -> usize {
        self.graph.k()
    }

    /// Name of the headline metric in the summary.
    pub fn metric_name(&self) -> &'static str {
        if self.data.is_classification() {
            "test_error"
        } else {
            "steady_mse"
        }
    }
}

fn parse_data(r: &mut Reader, k: usize, sigma: f64) -> Result<DataSource, ConfigError> {
    let (line, kind) = r.required("data")?;
    let n_key = "data.n_per_node";
    Ok(match kind.as_str() {
        "kernel_expansion" => {
            let d = KernelExpansionParams::default();
            DataSource::KernelExpansion(KernelExpansionParams {
                k,
                n_per_node: at_least_one(n_key, r.usize_or(n_key, d.n_per_node)?)?,
                d: at_least_one("data.d", r.usize_or("data.d", d.d)?)?,
                m: at_least_one("data.m", r.usize_or("data.m", d.m)?)?,
                sigma: positive("data.sigma", r.f64_or("data.sigma", sigma)?)?,
                sigma_x: positive("data.sigma_x", r.f64_or("data.sigma_x", d.sigma_x)?)?,
                sigma_eta: r.f64_or("data.sigma_eta", d.sigma_eta)?,
                coeff_std: r.f64_or("data.coeff_std", d.coeff_std)?,
            })
        }
        "quadratic" => DataSource::Quadratic {
            d: at_least_one("data.d", r.usize_or("data.d", 5)?)?,
            n_per_node: at_least_one(n_key, r.usize_or(n_key, 15000)?)?,
            sigma_eta: r.f64_or("data.sigma_eta", 0.05)?,
        },
        "chaotic1" => {
            let d = Chaotic1Params::default();
            let regressor = match r.string("data.regressor").as_deref().unwrap_or("prev_output") {
                "prev_output" => Chaotic1Regressor::PrevOutput,
                "prev_output_and_input" => Chaotic1Regressor::PrevOutputAndInput,
                other => return Err(ConfigError::at_key("data.regressor", format!("unknown regressor `{other}`"))),
            };
            DataSource::Chaotic1 {
                n_per_node: at_least_one(n_key, r.usize_or(n_key, 500)?)?,
                params: Chaotic1Params {
                    sigma_u: r.f64_or("data.sigma_u", d.sigma_u)?,
                    sigma_eta: r.f64_or("data.sigma_eta", d.sigma_eta)?,
                    d1: r.f64_or("data.d1", d.d1)?,
                    regressor,
                },
            }
        }
        "chaotic2" => {
            let d = Chaotic2Params::default();
            DataSource::Chaotic2 {
                n_per_node: at_least_one(n_key, r.usize_or(n_key, 1000)?)?,
                params: Chaotic2Params {
                    var_v: r.f64_or("data.var_v", d.var_v)?,
                    var_u_noise: r.f64_or("data.var_u_noise", d.var_u_noise)?,
                    sigma_eta: r.f64_or("data.sigma_eta", d.sigma_eta)?,
                    d1: r.f64_or("data.d1", d.d1)?,
                    d2: r.f64_or("data.d2", d.d2)?,
                },
            }
        }
        "waveform" => DataSource::Waveform {
            train_size: at_least_one("data.train_size", r.usize_or("data.train_size", 4000)?)?,
            test_size: at_least_one("data.test_size", r.usize_or("data.test_size", 1000)?)?,
        },
        "libsvm" => {
            let (_, path) = r.required("data.path")?;
            let test_path = r.string("data.test_path").map(PathBuf::from);
            let train_size = r.usize("data.train_size")?;
            if test_path.is_none() && train_size.is_none() {
                return Err(ConfigError::at_key("data.train_size", "needs a train size or a separate test file"));
            }
            DataSource::Libsvm { path: PathBuf::from(path), test_path, train_size, dim: r.usize("data.dim")? }
        }
        other => return Err(Reader::err("data", line, format!("unknown data source `{other}`"))),
    })
}
