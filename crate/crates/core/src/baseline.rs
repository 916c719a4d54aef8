//! Comparison baseline: per-node association matrices over
//! (time granule x location) and an SVD-based behavior-similarity score.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::trace::LocationVisit;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("granule {granule} does not divide horizon {horizon}")]
    GranuleMismatch { granule: f64, horizon: f64 },
    #[error("granule must be positive and finite, got {0}")]
    InvalidGranule(f64),
    #[error("profile dimension mismatch: {left} vs {right} locations")]
    ProfileDimensionMismatch { left: usize, right: usize },
}

/// Occupancy fractions for one node: entry `(g, p)` is the fraction of time
/// granule `g` the node spent at location `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationMatrix {
    pub node: usize,
    pub matrix: DMatrix<f64>,
}

/// Dominant behavior patterns of one node: top right singular vectors of its
/// association matrix with weights proportional to the singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorProfile {
    pub node: usize,
    pub vectors: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
}

impl BehaviorProfile {
    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.vectors.len()
    }
}

fn merge_intervals(mut spans: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (s, e) in spans {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    merged
}

/// Builds one association matrix per node over `horizon / granule` granule
/// rows and `location_count` columns. Visits of a node to the same location
/// are merged before overlap accounting, so repeated records cannot push an
/// entry past 1.
pub fn build_association(
    visits: &[LocationVisit],
    node_count: usize,
    location_count: usize,
    granule: f64,
    horizon: f64,
) -> Result<Vec<AssociationMatrix>, BaselineError> {
    if !(granule > 0.0) || !granule.is_finite() {
        return Err(BaselineError::InvalidGranule(granule));
    }
    let ratio = horizon / granule;
    if !(horizon > 0.0) || (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
        return Err(BaselineError::GranuleMismatch { granule, horizon });
    }
    let granules = ratio.round() as usize;

    // Visit spans per (node, location), clipped to the horizon.
    let mut spans = vec![vec![Vec::new(); location_count]; node_count];
    for v in visits {
        let s = v.start.max(0.0);
        let e = v.end.min(horizon);
        if s < e {
            spans[v.node][v.location].push((s, e));
        }
    }

    let matrices = spans
        .into_iter()
        .enumerate()
        .map(|(node, per_location)| {
            let mut m: DMatrix<f64> = DMatrix::zeros(granules, location_count);
            for (p, intervals) in per_location.into_iter().enumerate() {
                for (s, e) in merge_intervals(intervals) {
                    let g_lo = (s / granule).floor() as usize;
                    let g_hi = ((e / granule).ceil() as usize).min(granules);
                    for g in g_lo..g_hi {
                        let lo = g as f64 * granule;
                        let hi = lo + granule;
                        let overlap = e.min(hi) - s.max(lo);
                        if overlap > 0.0 {
                            m[(g, p)] += overlap / granule;
                        }
                    }
                }
            }
            for v in m.iter_mut() {
                *v = v.min(1.0);
            }
            AssociationMatrix { node, matrix: m }
        })
        .collect();
    Ok(matrices)
}

/// Extracts the top `r` right singular vectors of the association matrix,
/// capped at its numerical rank. A zero matrix yields an empty profile.
pub fn profile(a: &AssociationMatrix, r: usize) -> BehaviorProfile {
    let svd = a.matrix.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().cloned().fold(0.0f64, f64::max);
    let tol = a.matrix.nrows().max(a.matrix.ncols()) as f64 * f64::EPSILON * sigma_max;
    let rank = sigma.iter().filter(|&&s| s > tol && s > 0.0).count();
    let keep = r.min(rank);
    let total: f64 = sigma.iter().take(keep).sum();
    let vectors = (0..keep)
        .map(|i| DVector::from_iterator(v_t.ncols(), v_t.row(i).iter().copied()))
        .collect();
    let weights = sigma.iter().take(keep).map(|s| s / total).collect();
    BehaviorProfile { node: a.node, vectors, weights }
}

/// Weighted pattern alignment of two profiles:
/// `sum_{a,b} w_a^i * w_b^j * |v_a^i . v_b^j|`, in `[0, 1]`.
pub fn similarity(p: &BehaviorProfile, q: &BehaviorProfile) -> Result<f64, BaselineError> {
    if p.is_empty() || q.is_empty() {
        return Ok(0.0);
    }
    let left = p.vectors[0].len();
    let right = q.vectors[0].len();
    if left != right {
        return Err(BaselineError::ProfileDimensionMismatch { left, right });
    }
    let mut score = 0.0;
    for (va, wa) in p.vectors.iter().zip(&p.weights) {
        for (vb, wb) in q.vectors.iter().zip(&q.weights) {
            // unit vectors: |dot| can only exceed 1 through rounding
            score += wa * wb * va.dot(vb).abs().min(1.0);
        }
    }
    Ok(score)
}

/// Pairwise similarity over all nodes, as a symmetric matrix with zero
/// diagonal (self-pairs are never prediction candidates).
pub fn similarity_matrix(profiles: &[BehaviorProfile]) -> Result<DMatrix<f64>, BaselineError> {
    let n = profiles.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let s = similarity(&profiles[i], &profiles[j])?;
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
    Ok(m)
}
