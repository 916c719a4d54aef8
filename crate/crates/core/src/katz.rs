//! Collapsing the snapshot tensor into a recency-weighted matrix and scoring
//! node pairs with the Katz measure.
//!
//! The collapsed matrix weighs slice `t` (1-based, out of `T`) by
//! `(1 - theta)^(T - t)`, so the most recent slice carries weight 1. Scores
//! come in three flavors:
//!
//! * closed form `S = (I - beta*X)^-1 - I`, valid while `beta * rho(X) < 1`,
//! * a truncated power series `S = sum_{l=1..L} beta^l X^l`,
//! * a distributed variant where each node solves the closed form on the
//!   subgraph induced by its k-hop neighborhood and pair scores merge by max.

use std::io::{self, BufRead, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::SparseSym;
use crate::trace::{SnapshotTensor, WindowConfig};

/// Largest node count scored with dense matrices; beyond it the collapsed
/// tensor is stored sparse and only truncated-series scoring is available.
pub const DENSE_NODE_LIMIT: usize = 2048;

/// Validity margin for the convergence condition `beta * rho(X) < 1`.
pub const BETA_MARGIN: f64 = 1e-9;

/// Closed-form score entries smaller than this in magnitude are set to 0.
pub const SCORE_CLAMP: f64 = 1e-15;

#[derive(Debug, Error)]
pub enum KatzError {
    #[error("theta must lie in [0, 1], got {0}")]
    InvalidTheta(f64),
    #[error("beta must be positive and finite, got {0}")]
    InvalidBeta(f64),
    #[error("series truncation length must be >= 1")]
    InvalidTruncation,
    #[error("neighborhood scope k must be 1 or 2, got {0}")]
    InvalidKhop(usize),
    #[error("beta {beta} too large: beta * rho(X) >= 1 for rho estimate {rho}{}", fmt_node(.node))]
    BetaTooLarge { beta: f64, rho: f64, node: Option<usize> },
    #[error("closed-form scoring is dense-only: n = {n} exceeds limit {limit}")]
    ClosedFormUnavailable { n: usize, limit: usize },
    #[error("invalid collapsed matrix: {0}")]
    InvalidMatrix(String),
    #[error("score csv line {line}: {reason}")]
    BadScoreCsv { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

fn fmt_node(node: &Option<usize>) -> String {
    match node {
        Some(i) => format!(" (local view of node {i})"),
        None => String::new(),
    }
}

/// Dense or sparse symmetric non-negative matrix storage.
#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Dense(DMatrix<f64>),
    Sparse(SparseSym),
}

impl Storage {
    fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Storage::Dense(m) => m[(i, j)],
            Storage::Sparse(s) => s.get(i, j),
        }
    }

    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        match self {
            Storage::Dense(m) => {
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi = (0..x.len()).map(|j| m[(i, j)] * x[j]).sum();
                }
            }
            Storage::Sparse(s) => s.matvec(x, y),
        }
    }

    /// Neighbor lists of the support graph (strictly positive entries).
    fn support_adjacency(&self, n: usize) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); n];
        match self {
            Storage::Dense(m) => {
                for i in 0..n {
                    for j in (i + 1)..n {
                        if m[(i, j)] > 0.0 {
                            adj[i].push(j);
                            adj[j].push(i);
                        }
                    }
                }
            }
            Storage::Sparse(s) => {
                for (i, row) in adj.iter_mut().enumerate() {
                    row.extend(s.row(i).iter().filter(|&&(_, v)| v > 0.0).map(|&(j, _)| j));
                }
            }
        }
        adj
    }
}

/// Recency-weighted collapse of a snapshot tensor (or any user-supplied
/// symmetric non-negative matrix via [`CollapsedTensor::from_matrix`]).
#[derive(Debug, Clone, PartialEq)]
pub struct CollapsedTensor {
    n: usize,
    theta: Option<f64>,
    slice_count: Option<usize>,
    storage: Storage,
}

impl CollapsedTensor {
    /// Wraps an arbitrary symmetric non-negative zero-diagonal matrix so it
    /// can be scored directly.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self, KatzError> {
        if m.nrows() != m.ncols() {
            return Err(KatzError::InvalidMatrix(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        for i in 0..n {
            if m[(i, i)] != 0.0 {
                return Err(KatzError::InvalidMatrix(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = m[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(KatzError::InvalidMatrix(format!("entry ({i},{j}) = {v}")));
                }
                if m[(j, i)] != v {
                    return Err(KatzError::InvalidMatrix(format!("asymmetry at ({i},{j})")));
                }
            }
        }
        Ok(Self { n, theta: None, slice_count: None, storage: Storage::Dense(m) })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    pub fn slice_count(&self) -> Option<usize> {
        self.slice_count
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.storage.get(i, j)
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    /// Largest value any entry can take: `sum_{t=1..T} (1 - theta)^(T - t)`.
    pub fn max_entry_bound(&self) -> Option<f64> {
        let (theta, t) = (self.theta?, self.slice_count?);
        Some((0..t).map(|k| (1.0 - theta).powi(k as i32)).sum())
    }
}

/// Collapses the tensor per the recency weighting above. `theta = 0` keeps a
/// plain slice sum; `theta = 1` keeps only the most recent slice.
pub fn collapse(tensor: &SnapshotTensor, theta: f64) -> Result<CollapsedTensor, KatzError> {
    collapse_with_limit(tensor, theta, DENSE_NODE_LIMIT)
}

pub(crate) fn collapse_with_limit(
    tensor: &SnapshotTensor,
    theta: f64,
    dense_limit: usize,
) -> Result<CollapsedTensor, KatzError> {
    if !(0.0..=1.0).contains(&theta) || theta.is_nan() {
        return Err(KatzError::InvalidTheta(theta));
    }
    let n = tensor.node_count();
    let t = tensor.slice_count();
    let weight = |k: usize| (1.0 - theta).powi((t - 1 - k) as i32);
    let storage = if n <= dense_limit {
        let mut m = DMatrix::zeros(n, n);
        for (k, slice) in tensor.slices().iter().enumerate() {
            let w = weight(k);
            for (i, j) in slice.edges() {
                m[(i, j)] += w;
                m[(j, i)] += w;
            }
        }
        Storage::Dense(m)
    } else {
        let mut acc = std::collections::BTreeMap::new();
        for (k, slice) in tensor.slices().iter().enumerate() {
            let w = weight(k);
            for edge in slice.edges() {
                *acc.entry(edge).or_insert(0.0) += w;
            }
        }
        Storage::Sparse(SparseSym::from_upper_entries(
            n,
            acc.into_iter().map(|((i, j), v)| (i, j, v)),
        ))
    };
    Ok(CollapsedTensor { n, theta: Some(theta), slice_count: Some(t), storage })
}

/// Power iteration on `A + I`: the shift makes the top eigenvalue strictly
/// dominant even when the support graph is bipartite (where `-rho` is also
/// an eigenvalue and the unshifted Rayleigh quotient stalls below `rho`).
fn power_iteration(n: usize, matvec: impl Fn(&[f64], &mut [f64])) -> f64 {
    const SHIFT: f64 = 1.0;
    if n == 0 {
        return 0.0;
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut y = vec![0.0; n];
    let mut lambda = f64::NAN;
    for _ in 0..200 {
        matvec(&v, &mut y);
        // Unshifted Rayleigh quotient: exact 0 for a zero matrix.
        let next: f64 = v.iter().zip(&y).map(|(a, b)| a * b).sum();
        for (yi, vi) in y.iter_mut().zip(&v) {
            *yi += SHIFT * vi;
        }
        let norm = y.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = yi / norm;
        }
        let converged = (next - lambda).abs() <= 1e-10 * next.abs().max(1.0);
        lambda = next;
        if converged {
            break;
        }
    }
    lambda.max(0.0)
}

fn spectral_radius_dense(m: &DMatrix<f64>) -> f64 {
    power_iteration(m.nrows(), |x, y| {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..x.len()).map(|j| m[(i, j)] * x[j]).sum();
        }
    })
}

/// Estimates the spectral radius of `X` and checks the closed-form
/// convergence condition. Returns the estimate on success.
pub fn validate_beta(x: &CollapsedTensor, beta: f64) -> Result<f64, KatzError> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(KatzError::InvalidBeta(beta));
    }
    let rho = power_iteration(x.n, |v, y| x.storage.matvec(v, y));
    if beta * rho >= 1.0 - BETA_MARGIN {
        return Err(KatzError::BetaTooLarge { beta, rho, node: None });
    }
    Ok(rho)
}

/// How a score matrix was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreMode {
    Centralized,
    Distributed { k: usize },
    Truncated { l_max: usize },
}

impl ScoreMode {
    pub fn label(&self) -> &'static str {
        match self {
            ScoreMode::Centralized => "centralized",
            ScoreMode::Distributed { .. } => "distributed",
            ScoreMode::Truncated { .. } => "truncated",
        }
    }
}

/// Symmetric non-negative pair scores with the parameters that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n: usize,
    mode: ScoreMode,
    theta: Option<f64>,
    beta: f64,
    storage: Storage,
}

impl ScoreMatrix {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.storage.get(i, j)
    }

    pub fn mode(&self) -> ScoreMode {
        self.mode
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    /// Writes `i,j,score` rows for every pair `i < j`, scores with 17
    /// significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                writeln!(w, "{i},{j},{:.16e}", self.get(i, j))?;
            }
        }
        Ok(())
    }

    pub fn meta(&self, window: Option<&WindowConfig>) -> ScoreMeta {
        ScoreMeta {
            theta: self.theta,
            beta: self.beta,
            mode: self.mode.label().to_owned(),
            khop: match self.mode {
                ScoreMode::Distributed { k } => Some(k),
                _ => None,
            },
            l_max: match self.mode {
                ScoreMode::Truncated { l_max } => Some(l_max),
                _ => None,
            },
            slice_duration: window.map(WindowConfig::slice_duration),
            slice_count: window.map(WindowConfig::slice_count),
        }
    }
}

/// JSON sidecar describing how a score file was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMeta {
    pub theta: Option<f64>,
    pub beta: f64,
    pub mode: String,
    pub khop: Option<usize>,
    pub l_max: Option<usize>,
    pub slice_duration: Option<f64>,
    pub slice_count: Option<usize>,
}

/// Reads a score CSV written by [`ScoreMatrix::write_csv`] back into a dense
/// symmetric matrix over `n` nodes; absent pairs score 0.
pub fn read_scores_csv<R: BufRead>(reader: R, n: usize) -> Result<DMatrix<f64>, KatzError> {
    let mut m = DMatrix::zeros(n, n);
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(KatzError::BadScoreCsv {
                line: lineno,
                reason: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let parse_idx = |s: &str| -> Result<usize, KatzError> {
            s.trim().parse().map_err(|_| KatzError::BadScoreCsv {
                line: lineno,
                reason: format!("invalid node index `{s}`"),
            })
        };
        let i = parse_idx(fields[0])?;
        let j = parse_idx(fields[1])?;
        let score: f64 = fields[2].trim().parse().map_err(|_| KatzError::BadScoreCsv {
            line: lineno,
            reason: format!("invalid score `{}`", fields[2]),
        })?;
        if i >= j {
            return Err(KatzError::BadScoreCsv {
                line: lineno,
                reason: format!("pair ({i},{j}) is not in canonical i < j order"),
            });
        }
        if j >= n {
            return Err(KatzError::BadScoreCsv {
                line: lineno,
                reason: format!("node index {j} out of range for {n} nodes"),
            });
        }
        if !score.is_finite() {
            return Err(KatzError::BadScoreCsv {
                line: lineno,
                reason: format!("non-finite score {score}"),
            });
        }
        m[(i, j)] = score;
        m[(j, i)] = score;
    }
    Ok(m)
}

/// Symmetrizes by averaging with the transpose. Averaging two bitwise-equal
/// values is exact, so already-symmetric matrices pass through unchanged.
fn symmetrize(s: &mut DMatrix<f64>) {
    let n = s.nrows();
    for i in 0..n {
        for j in i..n {
            let avg = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = avg;
            s[(j, i)] = avg;
        }
    }
}

/// Symmetrizes and clamps entries below [`SCORE_CLAMP`] in magnitude to 0;
/// applied to closed-form solves only, where solver noise needs flooring.
fn symmetrize_clamp(s: &mut DMatrix<f64>) {
    symmetrize(s);
    for v in s.iter_mut() {
        if v.abs() < SCORE_CLAMP {
            *v = 0.0;
        }
    }
}

fn dense_of(x: &CollapsedTensor) -> Result<&DMatrix<f64>, KatzError> {
    match &x.storage {
        Storage::Dense(m) => Ok(m),
        Storage::Sparse(_) => {
            Err(KatzError::ClosedFormUnavailable { n: x.n, limit: DENSE_NODE_LIMIT })
        }
    }
}

/// Solves `(I - beta*X) S = beta*X`, which equals `(I - beta*X)^-1 - I`.
fn solve_closed(m: &DMatrix<f64>, beta: f64) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    let bx = m * beta;
    let a = DMatrix::identity(n, n) - &bx;
    let mut s = a.lu().solve(&bx)?;
    symmetrize_clamp(&mut s);
    Some(s)
}

/// Closed-form Katz scores `S = (I - beta*X)^-1 - I`.
pub fn katz_closed(x: &CollapsedTensor, beta: f64) -> Result<ScoreMatrix, KatzError> {
    let m = dense_of(x)?;
    let rho = validate_beta(x, beta)?;
    let s = solve_closed(m, beta)
        .ok_or(KatzError::BetaTooLarge { beta, rho, node: None })?;
    Ok(ScoreMatrix {
        n: x.n,
        mode: ScoreMode::Centralized,
        theta: x.theta,
        beta,
        storage: Storage::Dense(s),
    })
}

/// Truncated Katz series `S = sum_{l=1..l_max} beta^l X^l`. Converges to the
/// closed form as `l_max` grows whenever `beta * rho(X) < 1`, but is finite
/// (and well-defined) for any positive beta.
pub fn katz_truncated(
    x: &CollapsedTensor,
    beta: f64,
    l_max: usize,
) -> Result<ScoreMatrix, KatzError> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(KatzError::InvalidBeta(beta));
    }
    if l_max == 0 {
        return Err(KatzError::InvalidTruncation);
    }
    let storage = match &x.storage {
        Storage::Dense(m) => {
            let bx = m * beta;
            let mut term = bx.clone();
            let mut acc = bx.clone();
            for _ in 2..=l_max {
                term = &bx * &term;
                acc += &term;
            }
            symmetrize(&mut acc);
            Storage::Dense(acc)
        }
        Storage::Sparse(sp) => {
            let bx = sp.scale(beta);
            let mut term = bx.clone();
            let mut acc = bx.clone();
            for _ in 2..=l_max {
                term = bx.matmul(&term);
                acc = acc.add(&term);
            }
            Storage::Sparse(acc.symmetrized())
        }
    };
    Ok(ScoreMatrix {
        n: x.n,
        mode: ScoreMode::Truncated { l_max },
        theta: x.theta,
        beta,
        storage,
    })
}

/// Per-node k-hop neighborhoods on the support graph of the collapsed
/// tensor. Every node is a member of its own neighborhood.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KHopView {
    k: usize,
    views: Vec<Vec<usize>>,
}

impl KHopView {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Sorted members of node `i`'s neighborhood, including `i`.
    pub fn neighborhood(&self, i: usize) -> &[usize] {
        &self.views[i]
    }

    pub fn node_count(&self) -> usize {
        self.views.len()
    }
}

pub fn khop_view(x: &CollapsedTensor, k: usize) -> Result<KHopView, KatzError> {
    if k != 1 && k != 2 {
        return Err(KatzError::InvalidKhop(k));
    }
    let adj = x.storage.support_adjacency(x.n);
    let views = (0..x.n)
        .map(|i| {
            let mut set: std::collections::BTreeSet<usize> = [i].into();
            set.extend(adj[i].iter().copied());
            if k == 2 {
                for &j in &adj[i] {
                    set.extend(adj[j].iter().copied());
                }
            }
            set.into_iter().collect()
        })
        .collect();
    Ok(KHopView { k, views })
}

/// Distributed Katz scoring: each node runs the closed form on the subgraph
/// induced by its k-hop neighborhood; the score of a pair is the larger of
/// the two endpoints' local estimates (missing views contribute 0).
pub fn katz_distributed(
    x: &CollapsedTensor,
    beta: f64,
    k: usize,
) -> Result<ScoreMatrix, KatzError> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(KatzError::InvalidBeta(beta));
    }
    let m = dense_of(x)?;
    let view = khop_view(x, k)?;
    let locals: Vec<Result<Vec<f64>, KatzError>> = (0..x.n)
        .into_par_iter()
        .map(|i| {
            let nodes = view.neighborhood(i);
            let local = DMatrix::from_fn(nodes.len(), nodes.len(), |r, c| {
                m[(nodes[r], nodes[c])]
            });
            let rho = spectral_radius_dense(&local);
            if beta * rho >= 1.0 - BETA_MARGIN {
                return Err(KatzError::BetaTooLarge { beta, rho, node: Some(i) });
            }
            let s_local = solve_closed(&local, beta)
                .ok_or(KatzError::BetaTooLarge { beta, rho, node: Some(i) })?;
            let pos = nodes.binary_search(&i).expect("node is in its own view");
            Ok(s_local.row(pos).iter().copied().collect())
        })
        .collect();

    let mut s = DMatrix::zeros(x.n, x.n);
    for (i, local) in locals.into_iter().enumerate() {
        let row = local?;
        for (idx, &j) in view.neighborhood(i).iter().enumerate() {
            if j == i {
                continue;
            }
            let (a, b) = (i.min(j), i.max(j));
            if row[idx] > s[(a, b)] {
                s[(a, b)] = row[idx];
            }
        }
    }
    for i in 0..x.n {
        for j in (i + 1)..x.n {
            s[(j, i)] = s[(i, j)];
        }
    }
    Ok(ScoreMatrix {
        n: x.n,
        mode: ScoreMode::Distributed { k },
        theta: x.theta,
        beta,
        storage: Storage::Dense(s),
    })
}

/// Scores with whichever mode is requested; the CLI and sweep go through this.
pub fn score_with_mode(
    x: &CollapsedTensor,
    beta: f64,
    mode: ScoreMode,
) -> Result<ScoreMatrix, KatzError> {
    match mode {
        ScoreMode::Centralized => katz_closed(x, beta),
        ScoreMode::Distributed { k } => katz_distributed(x, beta, k),
        ScoreMode::Truncated { l_max } => katz_truncated(x, beta, l_max),
    }
}
