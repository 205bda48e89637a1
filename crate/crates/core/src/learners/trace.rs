use std::fmt::Write as _;
use std::io::Write;

use super::NetworkState;
use crate::error::{Error, Result};

/// Fixed leading CSV columns.
pub const TRACE_HEADER: &str = "iteration,network_mse,network_mse_db,disagreement,test_error,regret";

/// One recorded iteration. `network_mse` averages the squared a-priori
/// errors over the nodes and over the iterations since the previous row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub network_mse: f64,
    pub disagreement: Option<f64>,
    pub test_error: Option<f64>,
    pub regret: Option<f64>,
    /// Values for [`MetricsTrace::extra_columns`], in order.
    pub extras: Vec<Option<f64>>,
}

impl TraceRow {
    pub fn network_mse_db(&self) -> f64 {
        10.0 * self.network_mse.log10()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTrace {
    pub rows: Vec<TraceRow>,
    pub extra_columns: Vec<String>,
    pub k: usize,
    /// Iterations actually run (smaller than planned after divergence).
    pub iterations: usize,
    /// `L(ψ_{k,n})`, iteration-major (`n·K + k`), when requested.
    pub psi_losses: Option<Vec<f64>>,
    /// `max ‖θ_{k,n}‖` over all nodes and iterations.
    pub max_theta_norm: f64,
    /// First iteration at which the divergence limit tripped.
    pub diverged_at: Option<usize>,
    pub final_state: NetworkState,
}

impl MetricsTrace {
    pub fn mse_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.network_mse).collect()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Last recorded test error, if any hook produced one.
    pub fn final_test_error(&self) -> Option<f64> {
        self.rows.iter().rev().find_map(|r| r.test_error)
    }

    pub fn disagreement_at(&self, iteration: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.iteration == iteration).and_then(|r| r.disagreement)
    }

    pub fn extra(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let idx = self.extra_columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.extras[idx]).collect())
    }

    /// Fills the regret column from a per-iteration partial-sum series; rows
    /// past the end of the series stay empty.
    pub fn set_regret(&mut self, cumulative: &[f64]) {
        for row in &mut self.rows {
            row.regret = row.iteration.checked_sub(1).and_then(|i| cumulative.get(i)).copied();
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        for c in &self.extra_columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        let cell = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:e}"));
        for r in &self.rows {
            write!(
                out,
                "{},{},{},{},{},{}",
                r.iteration,
                cell(Some(r.network_mse)),
                cell(Some(r.network_mse_db())),
                cell(r.disagreement),
                cell(r.test_error),
                cell(r.regret)
            )
            .expect("writing to a String cannot fail");
            for e in &r.extras {
                out.push(',');
                out.push_str(&cell(*e));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        w.write_all(self.to_csv().as_bytes()).map_err(Error::from)
    }
}

/// Records rows every `cadence` iterations, averaging the MSE over each
/// window.
#[derive(Debug)]
pub(crate) struct Recorder {
    cadence: usize,
    total: usize,
    window_sum: f64,
    window_len: usize,
    pub rows: Vec<TraceRow>,
}

impl Recorder {
    pub fn new(cadence: usize, total: usize) -> Self {
        Recorder { cadence: cadence.max(1), total, window_sum: 0.0, window_len: 0, rows: Vec::new() }
    }

    pub fn is_due(&self, n: usize) -> bool {
        n.is_multiple_of(self.cadence) || n == self.total
    }

    /// Adds the iteration's mean squared error; returns a fresh row when `n`
    /// closes a window.
    pub fn push(&mut self, n: usize, mse: f64) -> Option<&mut TraceRow> {
        self.window_sum += mse;
        self.window_len += 1;
        if !self.is_due(n) {
            return None;
        }
        self.flush(n)
    }

    /// Closes the current window early (used when a run stops).
    pub fn flush(&mut self, n: usize) -> Option<&mut TraceRow> {
        if self.window_len == 0 {
            return None;
        }
        let mse = self.window_sum / self.window_len as f64;
        self.window_sum = 0.0;
        self.window_len = 0;
        self.rows.push(TraceRow {
            iteration: n,
            network_mse: mse,
            disagreement: None,
            test_error: None,
            regret: None,
            extras: Vec::new(),
        });
        self.rows.last_mut()
    }
}

/// Default recording cadence: every iteration up to 20000, else `⌈N/20000⌉`.
pub fn default_cadence(total: usize) -> usize {
    total.div_ceil(20_000).max(1)
}
