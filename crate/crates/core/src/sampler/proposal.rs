//! Random-walk and Langevin moves with their incremental weights.
//!
//! Both proposals use `Γ = γ² I`. The Langevin move is a single leapfrog-like
//! step `θ' = θ + ½Γ∇log π(θ) + p` with `p ~ N(0, Γ)`. Its backward kernel is
//! the same move started from `(θ', −p')`, where
//! `p' = p + ½Γ(∇log π(θ) + ∇log π(θ'))`; that move lands exactly on `θ`,
//! and the unit Jacobians of both maps cancel in the weight ratio.

use crate::math;

/// `θ + γ z`.
pub fn propose_rw<const D: usize>(theta: &[f64; D], step: f64, z: &[f64; D]) -> [f64; D] {
    let mut out = *theta;
    for d in 0..D {
        out[d] += step * z[d];
    }
    out
}

/// The deterministic Langevin map `θ + ½γ² g + p`.
pub fn langevin_map<const D: usize>(theta: &[f64; D], grad: &[f64; D], momentum: &[f64; D], step: f64) -> [f64; D] {
    let half = 0.5 * step * step;
    let mut out = *theta;
    for d in 0..D {
        out[d] = (out[d] + half * grad[d]) + momentum[d];
    }
    out
}

/// Draws `p = γ z ~ N(0, Γ)` and returns `(θ', p)`.
pub fn propose_langevin<const D: usize>(theta: &[f64; D], grad: &[f64; D], step: f64, z: &[f64; D]) -> ([f64; D], [f64; D]) {
    let mut p = [0.0; D];
    for d in 0..D {
        p[d] = step * z[d];
    }
    (langevin_map(theta, grad, &p, step), p)
}

/// `p' = p + ½Γ(g + g')`.
pub fn reverse_momentum<const D: usize>(p: &[f64; D], grad_prev: &[f64; D], grad_new: &[f64; D], step: f64) -> [f64; D] {
    let half = 0.5 * step * step;
    let mut out = *p;
    for d in 0..D {
        out[d] += half * (grad_prev[d] + grad_new[d]);
    }
    out
}

/// Symmetric random walk with `L = q`: the weight moves by the posterior ratio.
pub fn rw_log_weight(log_w: f64, log_post_new: f64, log_post_prev: f64) -> f64 {
    log_w + (log_post_new - log_post_prev)
}

/// Langevin weight with the reversed-momentum backward kernel:
/// `log π(θ') − log π(θ) + log N(−p'; 0, Γ) − log N(p; 0, Γ)`.
pub fn langevin_log_weight<const D: usize>(
    log_w: f64,
    log_post_new: f64,
    log_post_prev: f64,
    p_prev: &[f64; D],
    p_new: &[f64; D],
    step: f64,
) -> f64 {
    let var = step * step;
    let mut back = *p_new;
    back.iter_mut().for_each(|v| *v = -*v);
    let kernel = math::isotropic_logpdf(&back, var) - math::isotropic_logpdf(p_prev, var);
    log_w + (log_post_new - log_post_prev) + kernel
}
