//! Weight normalization, posterior-mean estimates and recycling.

use alloc::vec::Vec;

use crate::collective::tree;
use crate::math;

/// Normalized weights (log-sum-exp stabilized) and `N_eff = 1/Σ w̃²`.
/// `None` when every log-weight is `-inf`.
pub fn normalize_and_ess(log_weights: &[f64]) -> Option<(Vec<f64>, f64)> {
    let max = tree::pairwise(log_weights, tree::ReduceOp::Max);
    if !max.is_finite() {
        return None;
    }
    let e: Vec<f64> = log_weights.iter().map(|&l| math::exp(l - max)).collect();
    let sum = tree::pairwise_sum(&e);
    let w: Vec<f64> = e.iter().map(|v| v / sum).collect();
    let sq: Vec<f64> = w.iter().map(|v| v * v).collect();
    let n_eff = 1.0 / tree::pairwise_sum(&sq);
    Some((w, n_eff))
}

/// `Σ_i w̃_i θ_i`.
pub fn weighted_mean<const D: usize>(normalized: &[f64], thetas: &[[f64; D]]) -> [f64; D] {
    let rows: Vec<f64> = normalized.iter().zip(thetas).flat_map(|(w, th)| th.iter().map(move |v| w * v)).collect();
    let mut out = [0.0; D];
    out.copy_from_slice(&tree::pairwise_rows(&rows, D, tree::ReduceOp::Sum));
    out
}

/// Per-iteration estimates and their recycling scores.
///
/// `l_k = (Σ w)² / Σ w²`, which for normalized weights is just `N_eff`.
/// Recycling constants are `c_k = l_k / Σ l_k` and the recycled estimate is
/// `Σ c_k f̃_k`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecyclingLedger<const D: usize> {
    pub scores: Vec<f64>,
    pub estimates: Vec<[f64; D]>,
}

impl<const D: usize> RecyclingLedger<D> {
    pub fn new() -> Self {
        Self { scores: Vec::new(), estimates: Vec::new() }
    }

    pub fn push(&mut self, estimate: [f64; D], score: f64) {
        self.estimates.push(estimate);
        self.scores.push(score);
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn constants(&self) -> Vec<f64> {
        let total: f64 = self.scores.iter().sum();
        self.scores.iter().map(|l| l / total).collect()
    }

    pub fn recycled(&self) -> [f64; D] {
        let mut out = [0.0; D];
        for (c, f) in self.constants().iter().zip(&self.estimates) {
            for d in 0..D {
                out[d] += c * f[d];
            }
        }
        out
    }
}

/// `(Σ w)² / Σ w²` from raw (unnormalized, linear) weights.
pub fn recycling_score(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let sq: f64 = weights.iter().map(|w| w * w).sum();
    s * s / sq
}

/// Mean over parameters of the squared error.
pub fn mse<const D: usize>(estimate: &[f64; D], truth: &[f64; D]) -> f64 {
    estimate.iter().zip(truth).map(|(e, t)| (e - t) * (e - t)).sum::<f64>() / D as f64
}
