//! Combine-then-adapt diffusion over random Fourier features and its
//! single-node special case.
//!
//! Every iteration `n = 1, 2, ...` first forms `ψ_k = Σ_l a_kl θ_l` at all
//! nodes, then takes one (sub)gradient step per node at its own sample:
//! `θ_k = ψ_k − μ_n ∇L(z(x_{k,n}), y_{k,n}, ψ_k)`. With the squared loss this
//! is RFF-DKLMS; with the regularized hinge loss and `μ_n = 1/(λn)` it is
//! distributed Pegasos.

mod trace;

pub use trace::{default_cadence, MetricsTrace, TraceRow, TRACE_HEADER};
pub(crate) use trace::Recorder;

use crate::data::{SampleStream, TestSet};
use crate::error::{check_dim, Error, Result};
use crate::features::{dot, FeatureMap};
use crate::losses::Loss;
use crate::network::{disagreement_flat, CombinationMatrix};

/// Stacked node vectors `θ_{k,n}`, node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    k: usize,
    dim: usize,
    thetas: Vec<f64>,
    iteration: usize,
}

impl NetworkState {
    pub fn zeros(k: usize, dim: usize) -> Self {
        NetworkState { k, dim, thetas: vec![0.0; k * dim], iteration: 0 }
    }

    pub fn from_nodes(thetas: &[Vec<f64>]) -> Result<Self> {
        let dim = thetas.first().map_or(0, Vec::len);
        if thetas.is_empty() || thetas.iter().any(|t| t.len() != dim) {
            return Err(Error::param("network state needs K >= 1 vectors of equal length"));
        }
        Ok(NetworkState { k: thetas.len(), dim, thetas: thetas.concat(), iteration: 0 })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.thetas[k * self.dim..(k + 1) * self.dim]
    }

    pub fn flat(&self) -> &[f64] {
        &self.thetas
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        self.thetas.chunks(self.dim.max(1)).map(<[f64]>::to_vec).collect()
    }

    /// Node-average `θ̄ = (1/K) Σ_k θ_k`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for k in 0..self.k {
            for (a, b) in m.iter_mut().zip(self.node(k)) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.k as f64);
        m
    }

    pub fn disagreement(&self) -> f64 {
        disagreement_flat(&self.thetas, self.k, self.dim)
    }
}

/// Step-size sequence `μ_n`, `n ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Constant { mu: f64 },
    InverseSqrt { mu: f64 },
    Pegasos { lambda: f64 },
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        let (name, v) = match *self {
            StepSchedule::Constant { mu } | StepSchedule::InverseSqrt { mu } => ("mu", mu),
            StepSchedule::Pegasos { lambda } => ("lambda", lambda),
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::param(format!("step schedule needs {name} > 0, got {v}")));
        }
        Ok(())
    }

    pub fn step(&self, n: usize) -> f64 {
        let n = n as f64;
        match *self {
            StepSchedule::Constant { mu } => mu,
            StepSchedule::InverseSqrt { mu } => mu / n.sqrt(),
            StepSchedule::Pegasos { lambda } => 1.0 / (lambda * n),
        }
    }

    /// Exact hinge shrink factor `1 − 1/n` when this is the Pegasos schedule
    /// for the same `λ` as the loss.
    pub(crate) fn hinge_shrink(&self, loss: &Loss, n: usize) -> Option<f64> {
        match (*self, *loss) {
            (StepSchedule::Pegasos { lambda: a }, Loss::Hinge { lambda: b }) if a == b => Some(1.0 - 1.0 / n as f64),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            StepSchedule::Constant { .. } => "constant",
            StepSchedule::InverseSqrt { .. } => "inverse_sqrt",
            StepSchedule::Pegasos { .. } => "pegasos",
        }
    }
}

/// `ψ_k = Σ_l a_kl θ_l`, visiting only the nonzero entries of row `k`.
pub fn combine(a: &CombinationMatrix, state: &NetworkState) -> Result<Vec<Vec<f64>>> {
    check_dim("combination matrix", state.k(), a.k())?;
    let mut psi = vec![0.0; state.thetas.len()];
    combine_into(a, &state.thetas, state.dim, &mut psi);
    Ok(psi.chunks(state.dim.max(1)).map(<[f64]>::to_vec).collect())
}

fn combine_into(a: &CombinationMatrix, thetas: &[f64], dim: usize, psi: &mut [f64]) {
    for (k, out) in psi.chunks_mut(dim).enumerate() {
        let nbrs = a.neighbors(k);
        let (&first, rest) = nbrs.split_first().expect("a doubly stochastic row is nonzero");
        let w = a.get(k, first);
        for (o, t) in out.iter_mut().zip(&thetas[first * dim..(first + 1) * dim]) {
            *o = w * t;
        }
        for &l in rest {
            let w = a.get(k, l);
            for (o, t) in out.iter_mut().zip(&thetas[l * dim..(l + 1) * dim]) {
                *o += w * t;
            }
        }
    }
}

/// `θ = ψ − μ_n ∇L(z, y, ψ)`.
pub fn adapt(psi: &[f64], z: &[f64], y: f64, loss: &Loss, mu_n: f64) -> Result<Vec<f64>> {
    if !(mu_n > 0.0) {
        return Err(Error::param(format!("step size must be positive, got {mu_n}")));
    }
    let g = loss.eval(z, y, psi)?.grad;
    Ok(psi.iter().zip(&g).map(|(p, gi)| p - mu_n * gi).collect())
}

/// A metric evaluated on the network state at selected iterations.
pub trait MetricHook {
    /// CSV column; `"test_error"` fills the fixed column, anything else
    /// becomes an extra column.
    fn column(&self) -> &str;
    fn evaluate(&mut self, iteration: usize, state: &NetworkState) -> Result<f64>;
}

/// Held-out misclassification rate of `sign(θ_kᵀ z(x))`, averaged over nodes.
/// A zero score counts as `+1`.
pub struct TestErrorHook {
    map: FeatureMap,
    test: TestSet,
    cached: Option<Vec<Vec<f64>>>,
}

/// Largest test set (rows × features) whose transform is kept in memory.
const TEST_CACHE_LIMIT: usize = 1 << 22;

impl TestErrorHook {
    pub fn new(map: &FeatureMap, test: TestSet) -> Result<Self> {
        if test.is_empty() {
            return Err(Error::param("test set is empty"));
        }
        for x in &test.xs {
            check_dim("test input", map.dim_in(), x.len())?;
        }
        let cached = if test.len() * map.dim_out() <= TEST_CACHE_LIMIT {
            Some(test.xs.iter().map(|x| map.transform(x)).collect::<Result<_>>()?)
        } else {
            None
        };
        Ok(TestErrorHook { map: map.clone(), test, cached })
    }

    pub fn error_rate(&self, state: &NetworkState) -> Result<f64> {
        check_dim("test hook state", self.map.dim_out(), state.dim())?;
        let mut wrong = 0usize;
        let mut z = vec![0.0; self.map.dim_out()];
        for (i, (x, &y)) in self.test.xs.iter().zip(&self.test.ys).enumerate() {
            let zi: &[f64] = match &self.cached {
                Some(c) => &c[i],
                None => {
                    self.map.transform_into(x, &mut z)?;
                    &z
                }
            };
            for k in 0..state.k() {
                let label = if dot(state.node(k), zi) >= 0.0 { 1.0 } else { -1.0 };
                if label != y {
                    wrong += 1;
                }
            }
        }
        Ok(wrong as f64 / (self.test.len() * state.k()) as f64)
    }
}

impl MetricHook for TestErrorHook {
    fn column(&self) -> &str {
        "test_error"
    }

    fn evaluate(&mut self, _iteration: usize, state: &NetworkState) -> Result<f64> {
        self.error_rate(state)
    }
}

/// Run options shared by [`run_diffusion`] and [`run_single`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub loss: Loss,
    pub schedule: StepSchedule,
    /// Samples used per epoch; each stream must hold at least this many.
    pub horizon: usize,
    /// Passes over the same samples; `n` keeps counting across passes.
    pub epochs: usize,
    /// Rows are recorded every `cadence` iterations (and at the last one).
    pub cadence: Option<usize>,
    /// Record disagreement on each row.
    pub track_disagreement: bool,
    /// Keep `L(ψ_{k,n})` for every node and iteration.
    pub track_psi_losses: bool,
    /// Hooks run when `n` is a multiple of this, and always at the end.
    /// `None` runs them only at the end.
    pub hook_every: Option<usize>,
    /// Stop once the iteration MSE exceeds this or turns non-finite.
    pub divergence_limit: Option<f64>,
}

impl RunOptions {
    pub fn new(loss: Loss, schedule: StepSchedule, horizon: usize) -> Self {
        RunOptions {
            loss,
            schedule,
            horizon,
            epochs: 1,
            cadence: None,
            track_disagreement: false,
            track_psi_losses: false,
            hook_every: None,
            divergence_limit: None,
        }
    }

    pub fn total_iterations(&self) -> usize {
        self.horizon * self.epochs
    }

    fn validate(&self, streams: &[SampleStream], dim_in: usize) -> Result<()> {
        self.schedule.validate()?;
        if self.horizon == 0 || self.epochs == 0 {
            return Err(Error::param("horizon and epochs must be at least 1"));
        }
        if let Loss::Hinge { lambda } = self.loss {
            if !(lambda > 0.0) {
                return Err(Error::param("hinge loss needs lambda > 0"));
            }
        }
        for s in streams {
            if s.len() < self.horizon {
                return Err(Error::Stream(format!(
                    "node {} supplies {} samples, horizon is {}",
                    s.node_id,
                    s.len(),
                    self.horizon
                )));
            }
            for sample in &s.samples[..self.horizon] {
                check_dim("stream input", dim_in, sample.x.len())?;
                if matches!(self.loss, Loss::Hinge { .. }) {
                    crate::losses::check_label(sample.y)?;
                }
            }
        }
        Ok(())
    }

    fn hook_due(&self, n: usize) -> bool {
        n == self.total_iterations() || self.hook_every.is_some_and(|h| h > 0 && n.is_multiple_of(h))
    }

    fn is_divergent(&self, mse: f64) -> bool {
        !mse.is_finite() || self.divergence_limit.is_some_and(|lim| mse > lim)
    }
}

/// Everything a run produces besides the hooks' side effects.
struct Collector<'h> {
    recorder: Recorder,
    hooks: Vec<&'h mut dyn MetricHook>,
    extra_columns: Vec<String>,
    psi_losses: Option<Vec<f64>>,
    max_norm: f64,
}

impl<'h> Collector<'h> {
    fn new(opts: &RunOptions, k: usize, hooks: Vec<&'h mut dyn MetricHook>) -> Self {
        let total = opts.total_iterations();
        let cadence = opts.cadence.unwrap_or_else(|| default_cadence(total));
        let extra_columns = hooks
            .iter()
            .map(|h| h.column().to_string())
            .filter(|c| c != "test_error")
            .collect();
        Collector {
            recorder: Recorder::new(cadence, total),
            hooks,
            extra_columns,
            psi_losses: opts.track_psi_losses.then(|| Vec::with_capacity(total * k)),
            max_norm: 0.0,
        }
    }

    /// Closes iteration `n`; `force` records a row even off-cadence.
    fn finish_iteration(
        &mut self,
        opts: &RunOptions,
        n: usize,
        mse: f64,
        state: &NetworkState,
        force: bool,
    ) -> Result<()> {
        let row_needed = self.recorder.push(n, mse).is_some() || (force && self.recorder.flush(n).is_some());
        if !row_needed {
            return Ok(());
        }
        let run_hooks = opts.hook_due(n) || force;
        let mut test_error = None;
        let mut extras = Vec::with_capacity(self.extra_columns.len());
        for hook in self.hooks.iter_mut() {
            let v = if run_hooks { Some(hook.evaluate(n, state)?) } else { None };
            if hook.column() == "test_error" {
                test_error = v;
            } else {
                extras.push(v);
            }
        }
        let row = self.recorder.rows.last_mut().expect("row was just recorded");
        row.disagreement = opts.track_disagreement.then(|| state.disagreement());
        row.test_error = test_error;
        row.extras = extras;
        Ok(())
    }

    fn into_trace(self, k: usize, iterations: usize, diverged_at: Option<usize>, state: NetworkState) -> MetricsTrace {
        MetricsTrace {
            rows: self.recorder.rows,
            extra_columns: self.extra_columns,
            k,
            iterations,
            psi_losses: self.psi_losses,
            max_theta_norm: self.max_norm,
            diverged_at,
            final_state: state,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Runs the diffusion from `θ_{k,0} = 0` over `horizon × epochs`
/// synchronous iterations. Iteration `n` uses sample `((n − 1) mod horizon) + 1`
/// of each stream.
pub fn run_diffusion(
    map: &FeatureMap,
    a: &CombinationMatrix,
    streams: &[SampleStream],
    opts: &RunOptions,
    hooks: Vec<&mut dyn MetricHook>,
) -> Result<MetricsTrace> {
    let k = streams.len();
    if k == 0 {
        return Err(Error::param("diffusion needs at least one stream"));
    }
    check_dim("combination matrix", k, a.k())?;
    opts.validate(streams, map.dim_in())?;
    let dim = map.dim_out();
    let total = opts.total_iterations();
    let mut state = NetworkState::zeros(k, dim);
    let mut psi = vec![0.0; k * dim];
    let mut z = vec![0.0; dim];
    let mut col = Collector::new(opts, k, hooks);
    let mut diverged_at = None;
    for n in 1..=total {
        let idx = (n - 1) % opts.horizon;
        let mu = opts.schedule.step(n);
        let shrink = opts.schedule.hinge_shrink(&opts.loss, n);
        combine_into(a, &state.thetas, dim, &mut psi);
        let mut sq_err = 0.0;
        for node in 0..k {
            let sample = &streams[node].samples[idx];
            map.transform_into(&sample.x, &mut z)?;
            let theta = &mut psi[node * dim..(node + 1) * dim];
            let (value, pred) = opts.loss.step_in_place(&z, sample.y, theta, mu, shrink);
            sq_err += (sample.y - pred) * (sample.y - pred);
            if let Some(l) = col.psi_losses.as_mut() {
                l.push(value);
            }
            col.max_norm = col.max_norm.max(norm(theta));
        }
        std::mem::swap(&mut state.thetas, &mut psi);
        state.iteration = n;
        let mse = sq_err / k as f64;
        let stop = opts.is_divergent(mse);
        col.finish_iteration(opts, n, mse, &state, stop)?;
        if stop {
            diverged_at = Some(n);
            break;
        }
    }
    let iterations = state.iteration;
    Ok(col.into_trace(k, iterations, diverged_at, state))
}

/// Single-node online learning `θ_n = θ_{n−1} − μ_n ∇L(z(x_n), y_n, θ_{n−1})`.
pub fn run_single(
    map: &FeatureMap,
    stream: &SampleStream,
    opts: &RunOptions,
    hooks: Vec<&mut dyn MetricHook>,
) -> Result<MetricsTrace> {
    opts.validate(std::slice::from_ref(stream), map.dim_in())?;
    let dim = map.dim_out();
    let total = opts.total_iterations();
    let mut state = NetworkState::zeros(1, dim);
    let mut z = vec![0.0; dim];
    let mut col = Collector::new(opts, 1, hooks);
    let mut diverged_at = None;
    for n in 1..=total {
        let sample = &stream.samples[(n - 1) % opts.horizon];
        map.transform_into(&sample.x, &mut z)?;
        let shrink = opts.schedule.hinge_shrink(&opts.loss, n);
        let (value, pred) = opts.loss.step_in_place(&z, sample.y, &mut state.thetas, opts.schedule.step(n), shrink);
        if let Some(l) = col.psi_losses.as_mut() {
            l.push(value);
        }
        col.max_norm = col.max_norm.max(norm(&state.thetas));
        state.iteration = n;
        let mse = (sample.y - pred) * (sample.y - pred);
        let stop = opts.is_divergent(mse);
        col.finish_iteration(opts, n, mse, &state, stop)?;
        if stop {
            diverged_at = Some(n);
            break;
        }
    }
    let iterations = state.iteration;
    Ok(col.into_trace(1, iterations, diverged_at, state))
}
