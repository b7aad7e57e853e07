//! Gradient-informed SMC² for static parameters of state-space models.
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! - [`tangent`]: forward-mode value-and-tangent arithmetic of fixed width `D`.
//! - [`ssm`]: the model abstraction (box priors, reparameterized proposals,
//!   incremental weights) and keyed noise generation.
//! - [`filter`]: the common-random-numbers particle filter that returns a
//!   log-likelihood estimate together with its gradient.
//! - [`models`]: the linear-Gaussian and SIR benchmark models, plus an exact
//!   Kalman-filter log-likelihood for the linear case.
//! - [`collective`]: deterministic tree collectives over an abstract
//!   [`collective::Transport`], bitwise identical for any worker count.
//! - [`sampler`]: the SMC sampler over θ with random-walk and Langevin
//!   proposals, L-kernel weighting, resampling and recycling.
//!
//! Threads, files and the command line live in the `crn-smc-runner` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod collective;
pub mod filter;
pub mod math;
pub mod models;
pub mod rng;
pub mod sampler;
pub mod ssm;
pub mod tangent;

pub use filter::{run_filter, FilterConfig, LikelihoodResult};
pub use sampler::{run_sampler, ProposalKind, RunConfig, RunReport};
pub use ssm::{BoxPrior, ParamVector, StateSpaceModel};
pub use tangent::{DomainError, Tangent};
