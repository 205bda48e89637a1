//! Graph topologies, Metropolis combination weights and consensus geometry.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::seeded_rng;

/// Maximum number of resamples before graph generation gives up.
pub const MAX_GRAPH_TRIES: usize = 10_000;

/// An undirected connected graph on nodes `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    k: usize,
    /// Unordered pairs stored as `(u, v)` with `u < v`.
    edges: BTreeSet<(usize, usize)>,
    seed: Option<u64>,
}

impl Topology {
    /// Builds a topology, rejecting self-loops, out-of-range nodes and
    /// disconnected edge sets.
    pub fn new(k: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("topology needs at least one node"));
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::param(format!("self-loop at node {u}")));
            }
            if u >= k || v >= k {
                return Err(Error::param(format!("edge ({u}, {v}) outside 0..{k}")));
            }
            set.insert((u.min(v), u.max(v)));
        }
        if !is_connected(k, &set) {
            return Err(Error::param("topology is not connected"));
        }
        Ok(Topology { k, edges: set, seed: None })
    }

    pub fn complete(k: usize) -> Result<Self> {
        Topology::new(k, (0..k).flat_map(|u| (u + 1..k).map(move |v| (u, v))))
    }

    pub fn path(k: usize) -> Result<Self> {
        Topology::new(k, (1..k).map(|v| (v - 1, v)))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.k];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edges.len() as f64 / self.k as f64
    }

    /// Edge-list text: `K <count>` followed by one `u v` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("K {}\n", self.k);
        for (u, v) in self.edges() {
            writeln!(out, "{u} {v}").expect("writing to a String cannot fail");
        }
        out
    }

    pub fn write_edge_list(&self, mut w: impl Write) -> Result<()> {
        w.write_all(self.to_edge_list().as_bytes())?;
        Ok(())
    }

    pub fn read_edge_list(r: impl BufRead) -> Result<Self> {
        let mut k = None;
        let mut edges = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let text = line.trim();
            if text.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Parse { line: lineno, message: msg.to_string() };
            let fields: Vec<&str> = text.split_whitespace().collect();
            match (k, fields.as_slice()) {
                (None, ["K", n]) => k = Some(n.parse::<usize>().map_err(|_| bad("bad node count"))?),
                (None, _) => return Err(bad("expected header 'K <count>'")),
                (Some(_), [u, v]) => {
                    let u = u.parse::<usize>().map_err(|_| bad("bad node index"))?;
                    let v = v.parse::<usize>().map_err(|_| bad("bad node index"))?;
                    edges.push((u, v));
                }
                (Some(_), _) => return Err(bad("expected 'u v'")),
            }
        }
        let k = k.ok_or_else(|| Error::param("empty edge list"))?;
        Topology::new(k, edges)
    }
}

fn is_connected(k: usize, edges: &BTreeSet<(usize, usize)>) -> bool {
    let adj = adjacency(k, edges);
    let mut seen = vec![false; k];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == k
}

fn adjacency(k: usize, edges: &BTreeSet<(usize, usize)>) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); k];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    adj
}

/// Erdős–Rényi graph `G(K, p)` resampled until connected.
///
/// Pairs `(u, v)`, `u < v`, are visited in lexicographic order and each is
/// kept with probability `p_attach`.
pub fn random_connected_graph(k: usize, p_attach: f64, seed: u64) -> Result<Topology> {
    if k == 0 {
        return Err(Error::param("graph needs at least one node"));
    }
    if !(p_attach > 0.0 && p_attach <= 1.0) {
        return Err(Error::param(format!("attachment probability must lie in (0, 1], got {p_attach}")));
    }
    let mut rng = seeded_rng(seed);
    for _ in 0..MAX_GRAPH_TRIES {
        let mut edges = BTreeSet::new();
        for u in 0..k {
            for v in u + 1..k {
                if rng.random::<f64>() < p_attach {
                    edges.insert((u, v));
                }
            }
        }
        if is_connected(k, &edges) {
            return Ok(Topology { k, edges, seed: Some(seed) });
        }
    }
    Err(Error::Generation(format!(
        "no connected graph with K={k}, p={p_attach} after {MAX_GRAPH_TRIES} tries"
    )))
}

/// A doubly stochastic combination matrix together with each node's
/// neighborhood (the nonzero columns of its row, itself included).
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationMatrix {
    entries: DMatrix<f64>,
    neighbors: Vec<Vec<usize>>,
}

impl CombinationMatrix {
    /// `A = I_K`, the non-cooperative network.
    pub fn identity(k: usize) -> Self {
        CombinationMatrix::from_matrix(DMatrix::identity(k, k))
    }

    /// Wraps an arbitrary square matrix; validity is checked separately with
    /// [`validate_doubly_stochastic`].
    pub fn from_matrix(entries: DMatrix<f64>) -> Self {
        let neighbors = (0..entries.nrows())
            .map(|k| (0..entries.ncols()).filter(|&l| entries[(k, l)] != 0.0).collect())
            .collect();
        CombinationMatrix { entries, neighbors }
    }

    pub fn k(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.entries[(k, l)]
    }

    /// Nodes `l` with `a_{k,l} != 0`, ascending.
    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.neighbors[k]
    }

    pub fn is_identity(&self) -> bool {
        self.entries == DMatrix::identity(self.k(), self.k())
    }
}

/// Metropolis rule: `a_kl = 1/max(|N_k|, |N_l|)` on edges, where `|N_k|`
/// counts node `k` itself, and the self-weight absorbs the remainder.
pub fn metropolis_weights(t: &Topology) -> CombinationMatrix {
    let k = t.k();
    let size: Vec<usize> = t.degrees().into_iter().map(|d| d + 1).collect();
    let mut a = DMatrix::zeros(k, k);
    for (u, v) in t.edges() {
        let w = 1.0 / size[u].max(size[v]) as f64;
        a[(u, v)] = w;
        a[(v, u)] = w;
    }
    for u in 0..k {
        let off: f64 = (0..k).filter(|&v| v != u).map(|v| a[(u, v)]).sum();
        a[(u, u)] = 1.0 - off;
    }
    CombinationMatrix::from_matrix(a)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticityReport {
    pub pass: bool,
    pub max_row_deviation: f64,
    pub max_col_deviation: f64,
    pub max_asymmetry: f64,
    pub min_entry: f64,
}

/// Checks nonnegativity, symmetry and unit row/column sums within `tol`.
pub fn validate_doubly_stochastic(a: &CombinationMatrix, tol: f64) -> StochasticityReport {
    let m = a.matrix();
    let n = m.nrows();
    let mut report = StochasticityReport {
        pass: false,
        max_row_deviation: 0.0,
        max_col_deviation: 0.0,
        max_asymmetry: 0.0,
        min_entry: f64::INFINITY,
    };
    if n != m.ncols() || n == 0 {
        report.max_row_deviation = f64::INFINITY;
        return report;
    }
    for i in 0..n {
        report.max_row_deviation = report.max_row_deviation.max((m.row(i).sum() - 1.0).abs());
        report.max_col_deviation = report.max_col_deviation.max((m.column(i).sum() - 1.0).abs());
        for j in 0..n {
            report.min_entry = report.min_entry.min(m[(i, j)]);
            report.max_asymmetry = report.max_asymmetry.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    report.pass = report.min_entry >= 0.0
        && report.max_asymmetry <= tol
        && report.max_row_deviation <= tol
        && report.max_col_deviation <= tol;
    report
}

/// Second-smallest eigenvalue of the graph Laplacian.
pub fn algebraic_connectivity(t: &Topology) -> Result<f64> {
    laplacian_lambda2(t.k(), t.edges())
}

/// λ₂ of the Laplacian of an arbitrary (possibly disconnected) edge set.
pub fn laplacian_lambda2(k: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<f64> {
    if k < 2 {
        return Err(Error::param("algebraic connectivity needs K >= 2"));
    }
    let mut lap = DMatrix::<f64>::zeros(k, k);
    for (u, v) in edges {
        if u >= k || v >= k || u == v {
            return Err(Error::param(format!("invalid edge ({u}, {v})")));
        }
        lap[(u, v)] -= 1.0;
        lap[(v, u)] -= 1.0;
        lap[(u, u)] += 1.0;
        lap[(v, v)] += 1.0;
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(lap).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    // The smallest eigenvalue is zero up to rounding; clamp tiny values.
    Ok(if eig[1].abs() < 1e-10 { 0.0 } else { eig[1] })
}

/// Euclidean distance from the stacked vector to the consensus subspace.
pub fn disagreement(thetas: &[Vec<f64>]) -> Result<f64> {
    let dim = thetas.first().map_or(0, Vec::len);
    if thetas.iter().any(|t| t.len() != dim) {
        return Err(Error::param("ragged node vectors"));
    }
    Ok(disagreement_flat(&thetas.concat(), thetas.len(), dim))
}

/// [`disagreement`] on a node-major `K·D` buffer.
pub(crate) fn disagreement_flat(flat: &[f64], k: usize, dim: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for j in 0..dim {
        let mean = (0..k).map(|n| flat[n * dim + j]).sum::<f64>() / k as f64;
        acc += (0..k).map(|n| (flat[n * dim + j] - mean).powi(2)).sum::<f64>();
    }
    acc.sqrt()
}
