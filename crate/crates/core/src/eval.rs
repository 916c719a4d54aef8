//! Score-versus-ground-truth evaluation: ROC curves with trapezoidal AUC,
//! the top-L hit ratio at the prediction period, the empirical CDF of
//! positive scores, and parameter-grid sweeps.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::katz::{self, CollapsedTensor, KatzError, ScoreMatrix, ScoreMode};
use crate::trace::{Adjacency, SnapshotTensor};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("candidate set contains no positive pairs")]
    NoPositives,
    #[error("candidate set contains no negative pairs")]
    NoNegatives,
    #[error("node count mismatch: scores {scores}, truth {truth}, candidates {candidates}")]
    NodeCountMismatch { scores: usize, truth: usize, candidates: usize },
}

/// Anything that assigns a score to unordered node pairs.
pub trait PairScores {
    fn node_count(&self) -> usize;
    fn get(&self, i: usize, j: usize) -> f64;
}

impl PairScores for ScoreMatrix {
    fn node_count(&self) -> usize {
        ScoreMatrix::node_count(self)
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        ScoreMatrix::get(self, i, j)
    }
}

impl PairScores for DMatrix<f64> {
    fn node_count(&self) -> usize {
        self.nrows()
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self[(i, j)]
    }
}

/// Which pairs an evaluation ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    AllLinks,
    NewLinksOnly,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::AllLinks => "all",
            Regime::NewLinksOnly => "new",
        }
    }
}

/// Boolean mask over unordered pairs `i < j`. The diagonal is always
/// excluded; the new-links regime additionally drops every pair seen in any
/// observed slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    n: usize,
    regime: Regime,
    mask: Vec<bool>,
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl CandidateSet {
    /// Every unordered pair over `n` nodes.
    pub fn all_links(n: usize) -> Self {
        Self { n, regime: Regime::AllLinks, mask: vec![true; n * (n - 1) / 2] }
    }

    /// Pairs never linked during the observed window.
    pub fn new_links_only(tensor: &SnapshotTensor) -> Self {
        let n = tensor.node_count();
        let mut set = Self {
            n,
            regime: Regime::NewLinksOnly,
            mask: vec![true; n * (n - 1) / 2],
        };
        for (i, j) in tensor.union_support().edges() {
            set.mask[pair_index(n, i, j)] = false;
        }
        set
    }

    pub fn for_regime(regime: Regime, tensor: &SnapshotTensor) -> Self {
        match regime {
            Regime::AllLinks => Self::all_links(tensor.node_count()),
            Regime::NewLinksOnly => Self::new_links_only(tensor),
        }
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i != j && self.mask[pair_index(self.n, i.min(j), i.max(j))]
    }

    /// Candidate pairs in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (0..n)
            .flat_map(move |i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(move |&(i, j)| self.mask[pair_index(n, i, j)])
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Roc {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

fn check_dims(
    scores: &impl PairScores,
    truth: &Adjacency,
    cand: &CandidateSet,
) -> Result<(), EvalError> {
    if scores.node_count() != truth.node_count() || truth.node_count() != cand.node_count() {
        return Err(EvalError::NodeCountMismatch {
            scores: scores.node_count(),
            truth: truth.node_count(),
            candidates: cand.node_count(),
        });
    }
    Ok(())
}

/// ROC by threshold sweep over distinct score values, ties grouped so equal
/// scores enter together (diagonal segments), AUC by the trapezoidal rule.
pub fn roc(
    scores: &impl PairScores,
    truth: &Adjacency,
    cand: &CandidateSet,
) -> Result<Roc, EvalError> {
    check_dims(scores, truth, cand)?;
    let mut ranked: Vec<(f64, bool)> = cand
        .pairs()
        .map(|(i, j)| (scores.get(i, j), truth.contains(i, j)))
        .collect();
    let positives = ranked.iter().filter(|&&(_, p)| p).count();
    let negatives = ranked.len() - positives;
    if positives == 0 {
        return Err(EvalError::NoPositives);
    }
    if negatives == 0 {
        return Err(EvalError::NoNegatives);
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut idx = 0;
    while idx < ranked.len() {
        let threshold = ranked[idx].0;
        while idx < ranked.len() && ranked[idx].0 == threshold {
            if ranked[idx].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            idx += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
        });
    }

    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum();
    Ok(Roc { points, auc })
}

/// Top-L hit count at the prediction period. `l` is the number of true links
/// within the candidate set; `ratio` is `None` when there are none. Ties at
/// the cutoff are broken by lexicographic pair order and flagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopL {
    pub l: usize,
    pub hits: usize,
    pub ratio: Option<f64>,
    pub tie_at_cutoff: bool,
}

pub fn top_l_ratio(
    scores: &impl PairScores,
    truth: &Adjacency,
    cand: &CandidateSet,
) -> Result<TopL, EvalError> {
    check_dims(scores, truth, cand)?;
    let mut ranked: Vec<(f64, usize, usize)> = cand
        .pairs()
        .map(|(i, j)| (scores.get(i, j), i, j))
        .collect();
    let l = ranked
        .iter()
        .filter(|&&(_, i, j)| truth.contains(i, j))
        .count();
    if l == 0 {
        return Ok(TopL { l: 0, hits: 0, ratio: None, tie_at_cutoff: false });
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let hits = ranked
        .iter()
        .take(l)
        .filter(|&&(_, i, j)| truth.contains(i, j))
        .count();
    let tie_at_cutoff = l < ranked.len() && ranked[l - 1].0 == ranked[l].0;
    Ok(TopL {
        l,
        hits,
        ratio: Some(hits as f64 / l as f64),
        tie_at_cutoff,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub score: f64,
    pub fraction: f64,
}

/// Empirical CDF over strictly positive candidate-pair scores, one point per
/// distinct value. All-zero scores yield an empty CDF.
pub fn score_cdf(scores: &impl PairScores, cand: &CandidateSet) -> Vec<CdfPoint> {
    let mut positive: Vec<f64> = cand
        .pairs()
        .map(|(i, j)| scores.get(i, j))
        .filter(|&s| s > 0.0)
        .collect();
    positive.sort_by(f64::total_cmp);
    let total = positive.len();
    let mut points: Vec<CdfPoint> = Vec::new();
    for (k, s) in positive.into_iter().enumerate() {
        let fraction = (k + 1) as f64 / total as f64;
        match points.last_mut() {
            Some(last) if last.score == s => last.fraction = fraction,
            _ => points.push(CdfPoint { score: s, fraction }),
        }
    }
    points
}

/// Parameters echoed into a report so downstream files are self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub theta: Option<f64>,
    pub beta: Option<f64>,
    pub mode: String,
    pub khop: Option<usize>,
    pub l_max: Option<usize>,
    pub slice_duration: f64,
    pub slice_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub regime: Regime,
    pub auc: f64,
    pub top_l: TopL,
    pub roc: Vec<RocPoint>,
    pub cdf: Vec<CdfPoint>,
    pub params: ReportParams,
}

/// Runs the full evaluation bundle against one ground-truth adjacency.
pub fn evaluate(
    scores: &impl PairScores,
    truth: &Adjacency,
    cand: &CandidateSet,
    params: ReportParams,
) -> Result<EvalReport, EvalError> {
    let roc = roc(scores, truth, cand)?;
    let top_l = top_l_ratio(scores, truth, cand)?;
    let cdf = score_cdf(scores, cand);
    Ok(EvalReport {
        regime: cand.regime(),
        auc: roc.auc,
        top_l,
        roc: roc.points,
        cdf,
        params,
    })
}

/// One cell of a parameter sweep; scoring failures are captured per cell
/// instead of aborting the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub theta: f64,
    pub beta: f64,
    pub auc: Option<f64>,
    pub top_l: Option<TopL>,
    pub error: Option<String>,
}

/// Evaluates every (theta, beta) grid cell with the given scoring mode.
pub fn sweep(
    tensor: &SnapshotTensor,
    truth: &Adjacency,
    thetas: &[f64],
    betas: &[f64],
    mode: ScoreMode,
    regime: Regime,
) -> Vec<SweepCell> {
    let cand = CandidateSet::for_regime(regime, tensor);
    let mut cells = Vec::with_capacity(thetas.len() * betas.len());
    for &theta in thetas {
        let collapsed: Result<CollapsedTensor, KatzError> = katz::collapse(tensor, theta);
        for &beta in betas {
            let outcome = collapsed
                .as_ref()
                .map_err(|e| e.to_string())
                .and_then(|x| {
                    let scores = katz::score_with_mode(x, beta, mode).map_err(|e| e.to_string())?;
                    let r = roc(&scores, truth, &cand).map_err(|e| e.to_string())?;
                    let t = top_l_ratio(&scores, truth, &cand).map_err(|e| e.to_string())?;
                    Ok((r.auc, t))
                });
            cells.push(match outcome {
                Ok((auc, top_l)) => SweepCell {
                    theta,
                    beta,
                    auc: Some(auc),
                    top_l: Some(top_l),
                    error: None,
                },
                Err(error) => SweepCell { theta, beta, auc: None, top_l: None, error: Some(error) },
            });
        }
    }
    cells
}
