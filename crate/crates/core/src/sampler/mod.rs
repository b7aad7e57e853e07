//! SMC sampler over static parameters, with particle-filter likelihoods.
//!
//! One run of `K` iterations on `N` samples:
//!
//! - `k = 0`: draw θ from the prior and weight by the filter likelihood
//!   (`w = π/q₁` with `q₁` the prior).
//! - `k > 0`: move each sample (random walk or Langevin), evaluate the filter
//!   at the new point with a fresh seed, and update the weight.
//! - every iteration: normalize, compute `N_eff`, record the weighted mean
//!   and its recycling score, and resample when `N_eff < N/2`.
//!
//! The same loop runs on every worker of a [`Communicator`]; each holds a
//! contiguous shard of samples and meets the others only in collectives.
//! All draws are keyed by `(master seed, sample index, iteration)`, so the
//! report does not depend on the number of workers.

pub mod estimate;
pub mod proposal;

use alloc::vec;
use alloc::vec::Vec;

use crate::collective::{Communicator, ProtocolError, ReduceOp, Solo, Transport, WorkerTopology};
use crate::filter::{run_filter, FilterConfig, FilterError};
use crate::math;
use crate::rng::{keyed, standard_normal, stream, unit_open_closed, Purpose};
use crate::ssm::{ParamVector, StateSpaceModel};

pub use estimate::{mse, normalize_and_ess, weighted_mean, RecyclingLedger};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProposalKind {
    RandomWalk,
    FirstOrder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig<const D: usize> {
    pub n_samples: usize,
    pub n_particles: usize,
    pub iterations: usize,
    pub step_size: f64,
    pub proposal: ProposalKind,
    pub seed: u64,
    /// Ground truth for MSE reporting, when known.
    pub truth: Option<[f64; D]>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplerError {
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("every sample has zero weight at iteration {0}")]
    Degenerate(usize),
    #[error("invalid configuration: {0}")]
    Config(&'static str),
}

/// One sampler particle and what was cached when it was last evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<const D: usize> {
    pub theta: ParamVector<D>,
    pub log_weight: f64,
    pub log_posterior: f64,
    pub gradient: [f64; D],
    /// Filter seed of the cached evaluation.
    pub seed: u64,
}

impl<const D: usize> Sample<D> {
    const WIDTH: usize = 2 * D + 2;

    fn encode(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(Self::WIDTH);
        v.extend_from_slice(&self.theta.0);
        v.push(self.log_posterior);
        v.extend_from_slice(&self.gradient);
        v.push(f64::from_bits(self.seed));
        v
    }

    fn decode(row: &[f64], log_weight: f64) -> Self {
        let mut theta = [0.0; D];
        let mut gradient = [0.0; D];
        theta.copy_from_slice(&row[..D]);
        gradient.copy_from_slice(&row[D + 1..2 * D + 1]);
        Self { theta: ParamVector(theta), log_weight, log_posterior: row[D], gradient, seed: row[2 * D + 1].to_bits() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<const D: usize> {
    pub k: usize,
    pub estimate: [f64; D],
    pub ess: f64,
    pub ess_normalized: f64,
    pub resampled: bool,
    /// Recycled estimate over iterations `0..=k`.
    pub recycled: [f64; D],
    pub mse_running: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport<const D: usize> {
    pub iterations: Vec<IterationRecord<D>>,
    pub recycling_constants: Vec<f64>,
    pub recycled_estimate: [f64; D],
    pub mse: Option<f64>,
    /// Mean over iterations of `N_eff / N`.
    pub mean_ess_normalized: f64,
    pub filter_evaluations: u64,
    /// Proposals that left the prior support (zero weight).
    pub out_of_support: u64,
    /// Langevin moves that fell back to a random walk on a non-finite gradient.
    pub gradient_fallbacks: u64,
}

#[derive(Default)]
struct Counters {
    evaluations: u64,
    out_of_support: u64,
    fallbacks: u64,
}

struct Worker<'a, M, const D: usize> {
    model: &'a M,
    observations: &'a [f64],
    config: &'a RunConfig<D>,
}

impl<M: StateSpaceModel<D>, const D: usize> Worker<'_, M, D> {
    fn filter_seed(&self, i: usize, k: usize) -> u64 {
        keyed(self.config.seed, Purpose::FilterSeed, i as u64, k as u64)
    }

    fn standard_normals(&self, i: usize, k: usize) -> [f64; D] {
        let mut rng = stream(self.config.seed, Purpose::ParamProposal, i as u64, k as u64);
        let mut z = [0.0; D];
        z.iter_mut().for_each(|v| *v = standard_normal(&mut rng));
        z
    }

    /// `(log π, ∇log π)` at θ with filter seed `seed`.
    fn evaluate(&self, theta: &ParamVector<D>, seed: u64, counters: &mut Counters) -> Result<(f64, [f64; D]), SamplerError> {
        let prior = self.model.prior();
        let lp = prior.log_density(theta);
        if lp == f64::NEG_INFINITY {
            counters.out_of_support += 1;
            return Ok((lp, [0.0; D]));
        }
        counters.evaluations += 1;
        let res = run_filter(self.model, self.observations, theta, seed, FilterConfig { n_particles: self.config.n_particles })?;
        let mut grad = prior.log_density_gradient(theta);
        for d in 0..D {
            grad[d] += res.gradient[d];
        }
        Ok((lp + res.log_likelihood, grad))
    }

    fn initialize(&self, i: usize, counters: &mut Counters) -> Result<Sample<D>, SamplerError> {
        let theta = self.model.prior().sample(&mut stream(self.config.seed, Purpose::Prior, i as u64, 0));
        let seed = self.filter_seed(i, 0);
        let (log_posterior, gradient) = self.evaluate(&theta, seed, counters)?;
        // w = π/q₁ with q₁ the prior: the prior terms cancel.
        let log_weight = log_posterior - self.model.prior().log_density(&theta);
        Ok(Sample { theta, log_weight, log_posterior, gradient, seed })
    }

    fn advance(&self, s: &mut Sample<D>, i: usize, k: usize, counters: &mut Counters) -> Result<(), SamplerError> {
        if s.log_weight == f64::NEG_INFINITY {
            return Ok(());
        }
        let step = self.config.step_size;
        let z = self.standard_normals(i, k);
        let langevin = self.config.proposal == ProposalKind::FirstOrder;
        let usable = s.gradient.iter().all(|g| g.is_finite());
        if langevin && !usable {
            counters.fallbacks += 1;
        }
        let seed = self.filter_seed(i, k);
        if langevin && usable {
            let (theta, p) = proposal::propose_langevin(&s.theta.0, &s.gradient, step, &z);
            let theta = ParamVector(theta);
            let (lp, grad) = self.evaluate(&theta, seed, counters)?;
            let p_new = proposal::reverse_momentum(&p, &s.gradient, &grad, step);
            s.log_weight = if lp == f64::NEG_INFINITY {
                lp
            } else {
                proposal::langevin_log_weight(s.log_weight, lp, s.log_posterior, &p, &p_new, step)
            };
            *s = Sample { theta, log_posterior: lp, gradient: grad, seed, ..*s };
        } else {
            let theta = ParamVector(proposal::propose_rw(&s.theta.0, step, &z));
            let (lp, grad) = self.evaluate(&theta, seed, counters)?;
            s.log_weight = if lp == f64::NEG_INFINITY { lp } else { proposal::rw_log_weight(s.log_weight, lp, s.log_posterior) };
            *s = Sample { theta, log_posterior: lp, gradient: grad, seed, ..*s };
        }
        Ok(())
    }
}

fn validate<const D: usize>(config: &RunConfig<D>) -> Result<(), SamplerError> {
    if config.n_samples < 2 || !config.n_samples.is_power_of_two() {
        return Err(SamplerError::Config("number of samples must be a power of two ≥ 2"));
    }
    if config.n_particles < 2 {
        return Err(SamplerError::Config("number of filter particles must be ≥ 2"));
    }
    if config.iterations < 1 {
        return Err(SamplerError::Config("at least one iteration is required"));
    }
    if !(config.step_size > 0.0) || !config.step_size.is_finite() {
        return Err(SamplerError::Config("step size must be positive"));
    }
    Ok(())
}

/// Runs the sampler on one worker of a group. Every worker returns the same
/// report.
pub fn run_worker<M, T, const D: usize>(
    model: &M,
    observations: &[f64],
    config: &RunConfig<D>,
    comm: &mut Communicator<T>,
) -> Result<RunReport<D>, SamplerError>
where
    M: StateSpaceModel<D>,
    T: Transport,
{
    validate(config)?;
    let topo = WorkerTopology::new(config.n_samples, comm.size(), comm.rank())?;
    let shard = topo.shard();
    let n = config.n_samples as f64;
    let worker = Worker { model, observations, config };
    let mut counters = Counters::default();

    let mut samples = Vec::with_capacity(shard.len());
    for i in shard.clone() {
        samples.push(worker.initialize(i, &mut counters)?);
    }

    let mut ledger = RecyclingLedger::<D>::new();
    let mut records = Vec::with_capacity(config.iterations);
    for k in 0..config.iterations {
        if k > 0 {
            for (s, i) in samples.iter_mut().zip(shard.clone()) {
                worker.advance(s, i, k, &mut counters)?;
            }
        }

        let log_w: Vec<f64> = samples.iter().map(|s| s.log_weight).collect();
        let max = comm.tree_reduce_max(&log_w)?;
        if !max.is_finite() {
            return Err(SamplerError::Degenerate(k));
        }
        let scaled: Vec<f64> = log_w.iter().map(|&l| math::exp(l - max)).collect();
        let total = comm.tree_reduce_sum(&scaled)?;
        let normalized: Vec<f64> = scaled.iter().map(|w| w / total).collect();
        let squares: Vec<f64> = normalized.iter().map(|w| w * w).collect();
        let n_eff = 1.0 / comm.tree_reduce_sum(&squares)?;
        let rows: Vec<f64> = normalized.iter().zip(&samples).flat_map(|(w, s)| s.theta.0.map(|v| w * v)).collect();
        let mut estimate = [0.0; D];
        estimate.copy_from_slice(&comm.tree_reduce_rows(&rows, D, ReduceOp::Sum)?);
        ledger.push(estimate, n_eff);

        let resampled = n_eff < n / 2.0;
        if resampled {
            let uniforms: Vec<f64> =
                shard.clone().map(|i| unit_open_closed(&mut stream(config.seed, Purpose::SamplerResample, i as u64, k as u64))).collect();
            let items: Vec<Vec<f64>> = samples.iter().map(Sample::encode).collect();
            let rows = comm.parallel_resample(&scaled, &uniforms, &items)?;
            // Equal weights carrying the original total mass.
            let shared = max + math::ln(total) - math::ln(n);
            samples = rows.iter().map(|r| Sample::decode(r, shared)).collect();
        }

        let recycled = ledger.recycled();
        records.push(IterationRecord {
            k,
            estimate,
            ess: n_eff,
            ess_normalized: n_eff / n,
            resampled,
            recycled,
            mse_running: config.truth.map(|t| mse(&recycled, &t)),
        });
    }

    let totals =
        comm.allreduce(vec![counters.evaluations as f64, counters.out_of_support as f64, counters.fallbacks as f64], ReduceOp::Sum)?;
    let recycled_estimate = ledger.recycled();
    Ok(RunReport {
        mean_ess_normalized: records.iter().map(|r| r.ess_normalized).sum::<f64>() / records.len() as f64,
        recycling_constants: ledger.constants(),
        recycled_estimate,
        mse: config.truth.map(|t| mse(&recycled_estimate, &t)),
        iterations: records,
        filter_evaluations: totals[0] as u64,
        out_of_support: totals[1] as u64,
        gradient_fallbacks: totals[2] as u64,
    })
}

/// Single-worker run.
pub fn run_sampler<M: StateSpaceModel<D>, const D: usize>(
    model: &M,
    observations: &[f64],
    config: &RunConfig<D>,
) -> Result<RunReport<D>, SamplerError> {
    run_worker(model, observations, config, &mut Communicator::new(Solo))
}
