//! Serial reference forms of the tree collectives.
//!
//! These define the exact floating-point association every parallel
//! collective reproduces: pairwise halving for reductions, and a
//! largest-block-first fold over aligned power-of-two blocks for prefix
//! sums. With a power-of-two number of equally sized shards, the per-shard
//! partial results compose into exactly these values.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Max,
}

impl ReduceOp {
    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            ReduceOp::Sum => a + b,
            ReduceOp::Max => a.max(b),
        }
    }

    pub fn identity(self) -> f64 {
        match self {
            ReduceOp::Sum => 0.0,
            ReduceOp::Max => f64::NEG_INFINITY,
        }
    }
}

/// Pairwise tree sum: `sum(left half) + sum(right half)`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    pairwise(xs, ReduceOp::Sum)
}

pub fn pairwise(xs: &[f64], op: ReduceOp) -> f64 {
    match xs.len() {
        0 => op.identity(),
        1 => xs[0],
        n => {
            let (l, r) = xs.split_at(n / 2);
            op.apply(pairwise(l, op), pairwise(r, op))
        }
    }
}

/// Column-wise pairwise reduction of a row-major `rows × width` matrix.
pub fn pairwise_rows(data: &[f64], width: usize, op: ReduceOp) -> Vec<f64> {
    let rows = data.len().checked_div(width).unwrap_or(0);
    match rows {
        0 => vec![op.identity(); width],
        1 => data.to_vec(),
        n => {
            let (l, r) = data.split_at((n / 2) * width);
            let a = pairwise_rows(l, width, op);
            let b = pairwise_rows(r, width, op);
            a.into_iter().zip(b).map(|(x, y)| op.apply(x, y)).collect()
        }
    }
}

/// Sums of every aligned, complete power-of-two block of the input.
///
/// `level(l)[b]` is the pairwise sum of `values[b·2^l .. (b+1)·2^l]`.
#[derive(Debug, Clone)]
pub struct BlockSums {
    levels: Vec<Vec<f64>>,
}

impl BlockSums {
    pub fn new(values: &[f64]) -> Self {
        let mut levels = vec![values.to_vec()];
        loop {
            let prev = levels.last().unwrap();
            if prev.len() < 2 {
                break;
            }
            let next: Vec<f64> = prev.chunks_exact(2).map(|p| p[0] + p[1]).collect();
            levels.push(next);
        }
        Self { levels }
    }

    pub fn len(&self) -> usize {
        self.levels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Continues `acc` over `[0, len)`, adding the blocks of the binary
    /// decomposition of `len` from largest to smallest.
    pub fn fold_prefix(&self, mut acc: f64, len: usize) -> f64 {
        debug_assert!(len <= self.len());
        let mut pos = 0usize;
        for l in (0..self.levels.len()).rev() {
            let size = 1usize << l;
            if len & size != 0 {
                acc += self.levels[l][pos >> l];
                pos += size;
            }
        }
        acc
    }

    pub fn total(&self) -> f64 {
        self.fold_prefix(0.0, self.len())
    }
}

/// Canonical cumulative weights: `max_{m ≤ i}(excl(m) + w_m)` where `excl`
/// is the block-decomposition prefix sum. The running max makes the
/// sequence monotone despite rounding, and max is exact, so the result does
/// not depend on how the input is sharded.
pub fn cumulative(values: &[f64]) -> Vec<f64> {
    let blocks = BlockSums::new(values);
    let mut run = f64::NEG_INFINITY;
    values
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            run = run.max(blocks.fold_prefix(0.0, i) + w);
            run
        })
        .collect()
}

/// Smallest index `m` with `target ≤ cum[m]`, clamped to the last index.
#[inline]
pub fn select(cum: &[f64], target: f64) -> usize {
    cum.partition_point(|&c| c < target).min(cum.len() - 1)
}

/// Multinomial parent selection from (unnormalized) log-weights and
/// uniforms on `(0, 1]`. Returns `None` when no weight is positive.
pub fn multinomial_parents(log_weights: &[f64], uniforms: &[f64]) -> Option<Vec<usize>> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let w: Vec<f64> = log_weights.iter().map(|&l| crate::math::exp(l - max)).collect();
    let blocks = BlockSums::new(&w);
    let total = blocks.total();
    let cum = cumulative(&w);
    Some(uniforms.iter().map(|&u| select(&cum, u * total)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_basics() {
        assert_eq!(pairwise_sum(&[1.0; 8]), 8.0);
        assert_eq!(pairwise_sum(&[3.5]), 3.5);
        assert_eq!(pairwise(&[1.0, 7.0, -2.0], ReduceOp::Max), 7.0);
        assert_eq!(pairwise_rows(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 2, ReduceOp::Sum), vec![9.0, 12.0]);
    }

    #[test]
    fn block_total_is_pairwise_for_powers_of_two() {
        let v: Vec<f64> = (0..64).map(|i| 1.0 / (1.0 + i as f64).powf(1.3)).collect();
        assert_eq!(BlockSums::new(&v).total().to_bits(), pairwise_sum(&v).to_bits());
    }

    #[test]
    fn cumulative_simple() {
        assert_eq!(cumulative(&[1.0, 1.0, 1.0, 1.0]), vec![1.0, 2.0, 3.0, 4.0]);
        let c = cumulative(&[0.1, 0.4, 0.5]);
        assert!((c[0] - 0.1).abs() < 1e-15 && (c[1] - 0.5).abs() < 1e-15 && (c[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn counting_rule() {
        // c = (0.1, 0.5, 1.0), u = 0.6 → third particle (index 2).
        let lw: Vec<f64> = [0.1f64, 0.4, 0.5].iter().map(|w| w.ln()).collect();
        assert_eq!(multinomial_parents(&lw, &[0.6]).unwrap(), vec![2]);
        assert_eq!(multinomial_parents(&lw, &[0.05, 0.1, 0.3, 1.0]).unwrap(), vec![0, 0, 1, 2]);
        let flat = [0.0; 4];
        assert_eq!(multinomial_parents(&flat, &[0.01, 0.2, 0.249, 0.1]).unwrap(), vec![0; 4]);
        assert!(multinomial_parents(&[f64::NEG_INFINITY; 3], &[0.5]).is_none());
    }
}
