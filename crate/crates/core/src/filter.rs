//! Common-random-numbers particle filter with forward-mode gradients.
//!
//! All proposal noise and resampling uniforms are regenerated from the run
//! seed, so for a fixed seed the log-likelihood estimate is a deterministic,
//! almost-everywhere differentiable function of θ. States and log-weights are
//! [`Tangent`]s; the log-likelihood tangent is the gradient.
//!
//! Per step `t` the filter
//! 1. proposes every particle with the pre-drawn noise and adds the log
//!    incremental weight,
//! 2. takes `ℓ_t = log Σ_j exp(log w_j)` (the log-weights entering the step
//!    are normalized, so `ℓ_t` is the log of the mean increment) and
//!    subtracts it from every log-weight,
//! 3. resamples when `1 / Σ w̃² < N_x / 2`.
//!
//! The estimate is `Σ_t ℓ_t`, and its tangent is `Σ_t Σ_j w̃_j d log w_j / dθ`.

use alloc::vec;
use alloc::vec::Vec;

use crate::collective::tree;
use crate::math;
use crate::rng::{mix64, NoiseBundle};
use crate::ssm::{ParamVector, StateSpaceModel};
use crate::tangent::{self, DomainError, Tangent};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FilterError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("particle filter needs at least 2 particles, got {0}")]
    TooFewParticles(usize),
    #[error("empty observation sequence")]
    NoObservations,
    #[error("cannot resample: every weight is zero")]
    DegenerateWeights,
    #[error("expected {expected} resampling uniforms, got {got}")]
    UniformCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterConfig {
    pub n_particles: usize,
}

/// Particle states and log-weights, both carrying θ-tangents.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble<S, const D: usize> {
    pub states: Vec<S>,
    pub log_weights: Vec<Tangent<D>>,
    pub t: usize,
}

impl<S: Copy, const D: usize> ParticleEnsemble<S, D> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Self-normalized weights `w̃_j`.
    pub fn normalized_weights(&self) -> Vec<f64> {
        let lw: Vec<f64> = self.log_weights.iter().map(|w| w.value).collect();
        let lse = math::log_sum_exp(&lw);
        lw.iter().map(|&l| math::exp(l - lse)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodResult<const D: usize> {
    pub log_likelihood: f64,
    pub gradient: [f64; D],
    /// ESS after each step's weight update, before any resampling.
    pub ess: Vec<f64>,
    pub resample_count: usize,
    /// Digest of every resampling time and parent choice. Two runs with equal
    /// digests followed the same discrete path, so their estimates lie on the
    /// same smooth piece of the likelihood surface.
    pub ancestry: u64,
}

impl<const D: usize> LikelihoodResult<D> {
    fn degenerate(ess: Vec<f64>, resample_count: usize, ancestry: u64) -> Self {
        Self { log_likelihood: f64::NEG_INFINITY, gradient: [0.0; D], ess, resample_count, ancestry }
    }
}

/// `1 / Σ w̃²`.
pub fn ess_particles(normalized: &[f64]) -> f64 {
    math::ess(normalized)
}

/// Multinomial resampling driven by fixed uniforms.
///
/// Particle `i` takes the state (and state tangent) of parent
/// `κ_i = min{m : u_i ≤ c_m}`. Every new log-weight is
/// `log((1/N) Σ_j w_j)`, whose tangent is `Σ_j w̃_j d log w_j/dθ`, so the total
/// weight and its derivative are preserved. Returns the parent indices.
pub fn crn_multinomial_resample<S: Copy, const D: usize>(
    ensemble: &mut ParticleEnsemble<S, D>,
    uniforms: &[f64],
) -> Result<Vec<usize>, FilterError> {
    let n = ensemble.len();
    if uniforms.len() != n {
        return Err(FilterError::UniformCount { expected: n, got: uniforms.len() });
    }
    let lw: Vec<f64> = ensemble.log_weights.iter().map(|w| w.value).collect();
    let parents = tree::multinomial_parents(&lw, uniforms).ok_or(FilterError::DegenerateWeights)?;
    let total = tangent::log_sum_exp(&ensemble.log_weights);
    let shared = total - math::ln(n as f64);
    let states: Vec<S> = parents.iter().map(|&p| ensemble.states[p]).collect();
    ensemble.states = states;
    ensemble.log_weights.iter_mut().for_each(|w| *w = shared);
    Ok(parents)
}

/// Runs the filter at θ with common random numbers keyed by `seed`.
///
/// A step where every particle's weight underflows returns `-inf` with a
/// zero gradient rather than an error.
pub fn run_filter<M, const D: usize>(
    model: &M,
    observations: &[f64],
    theta: &ParamVector<D>,
    seed: u64,
    config: FilterConfig,
) -> Result<LikelihoodResult<D>, FilterError>
where
    M: StateSpaceModel<D>,
{
    let n = config.n_particles;
    if n < 2 {
        return Err(FilterError::TooFewParticles(n));
    }
    if observations.is_empty() {
        return Err(FilterError::NoObservations);
    }
    let theta_t = theta.lift();
    let init = model.initial_state(&theta_t);
    let mut ens = ParticleEnsemble { states: vec![init; n], log_weights: vec![Tangent::constant(-math::ln(n as f64)); n], t: 0 };
    let mut next = Vec::with_capacity(n);
    let mut noise = NoiseBundle::default();
    let mut loglik = Tangent::<D>::constant(0.0);
    let mut ess = Vec::with_capacity(observations.len());
    let mut resample_count = 0;
    let mut ancestry = mix64(seed);

    for (t, &y) in observations.iter().enumerate() {
        noise.fill_proposal(seed, t, n, M::NOISE_DIM);
        next.clear();
        for (j, prev) in ens.states.iter().enumerate() {
            let eps = &noise.proposal[j * M::NOISE_DIM..(j + 1) * M::NOISE_DIM];
            let x = model.propose_state(prev, &theta_t, y, eps)?;
            let inc = model.log_incremental_weight(&x, prev, &theta_t, y)?;
            ens.log_weights[j] += inc;
            next.push(x);
        }
        core::mem::swap(&mut ens.states, &mut next);
        ens.t = t + 1;

        let step = tangent::log_sum_exp(&ens.log_weights);
        if !step.value.is_finite() {
            return Ok(LikelihoodResult::degenerate(ess, resample_count, ancestry));
        }
        loglik += step;
        for w in &mut ens.log_weights {
            *w -= step;
        }

        let w: Vec<f64> = ens.log_weights.iter().map(|l| math::exp(l.value)).collect();
        let n_eff = ess_particles(&w);
        ess.push(n_eff);
        if n_eff < n as f64 / 2.0 {
            noise.fill_uniforms(seed, t, n);
            let parents = crn_multinomial_resample(&mut ens, &noise.uniforms)?;
            resample_count += 1;
            ancestry = mix64(ancestry ^ (t as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            for p in parents {
                ancestry = mix64(ancestry.wrapping_add(p as u64));
            }
        }
    }

    if !loglik.is_finite() {
        return Ok(LikelihoodResult::degenerate(ess, resample_count, ancestry));
    }
    Ok(LikelihoodResult { log_likelihood: loglik.value, gradient: loglik.tangent, ess, resample_count, ancestry })
}
