//! Discrete-time stochastic SIR epidemic model.
//!
//! ```text
//! S_t = S_{t-1} − β I_{t-1} S_{t-1} / N + s ε_β
//! I_t = I_{t-1} + β I_{t-1} S_{t-1} / N − γ I_{t-1} − s ε_β + s ε_γ
//! R_t = N − S_t − I_t
//! ```
//!
//! θ = (β, γ) with uniform priors on (0, 1)². The transition is the
//! proposal, and the infected count is observed with Gaussian noise.

use alloc::vec::Vec;

use rand::Rng;

use crate::rng::standard_normal;
use crate::ssm::{BoxPrior, ParamVector, StateProposal, StateSpaceModel};
use crate::tangent::{gaussian_logpdf, DomainError, Tangent};

pub const BETA: usize = 0;
pub const GAMMA: usize = 1;

pub const TRUE_THETA: [f64; 2] = [0.6, 0.3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirState {
    pub s: Tangent<2>,
    pub i: Tangent<2>,
    pub r: Tangent<2>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sir {
    pub population: f64,
    pub initial_infected: f64,
    /// Standard deviation of each compartment noise term.
    pub noise_std: f64,
    /// Standard deviation of the observed infected count.
    pub obs_std: f64,
    prior: BoxPrior<2>,
}

impl Default for Sir {
    fn default() -> Self {
        Self::new(1.0)
    }
}

impl Sir {
    pub fn new(obs_std: f64) -> Self {
        Self { population: 763.0, initial_infected: 1.0, noise_std: 0.5, obs_std, prior: BoxPrior::new([0.0, 0.0], [1.0, 1.0]) }
    }

    pub fn initial(&self) -> SirState {
        SirState {
            s: Tangent::constant(self.population - self.initial_infected),
            i: Tangent::constant(self.initial_infected),
            r: Tangent::constant(0.0),
        }
    }

    /// One transition given the two standard-normal draws.
    pub fn sir_step(&self, x: &SirState, theta: &[Tangent<2>; 2], eps_beta: f64, eps_gamma: f64) -> SirState {
        let infections = theta[BETA] * x.i * x.s * (1.0 / self.population);
        let nb = self.noise_std * eps_beta;
        let ng = self.noise_std * eps_gamma;
        let s = x.s - infections + nb;
        let i = x.i + infections - theta[GAMMA] * x.i - nb + ng;
        let r = -(s + i) + self.population;
        SirState { s, i, r }
    }

    /// `log N(y; max(I, 0), obs_std²)`.
    pub fn sir_observation_logpdf(&self, infected: Tangent<2>, y: f64) -> Result<Tangent<2>, DomainError> {
        if !(self.obs_std > 0.0) {
            return Err(DomainError::NonPositiveVariance(self.obs_std));
        }
        gaussian_logpdf(y, infected.clamp_below(0.0), Tangent::constant(self.obs_std * self.obs_std))
    }
}

impl StateSpaceModel<2> for Sir {
    type State = SirState;
    const NOISE_DIM: usize = 2;

    fn prior(&self) -> &BoxPrior<2> {
        &self.prior
    }

    fn state_proposal(&self) -> StateProposal {
        StateProposal::Transition
    }

    fn initial_state(&self, _: &[Tangent<2>; 2]) -> SirState {
        self.initial()
    }

    fn propose_state(&self, prev: &SirState, theta: &[Tangent<2>; 2], _: f64, noise: &[f64]) -> Result<SirState, DomainError> {
        Ok(self.sir_step(prev, theta, noise[0], noise[1]))
    }

    fn log_incremental_weight(&self, current: &SirState, _: &SirState, _: &[Tangent<2>; 2], y: f64) -> Result<Tangent<2>, DomainError> {
        self.sir_observation_logpdf(current.i, y)
    }

    fn simulate<R: Rng + ?Sized>(&self, theta: &ParamVector<2>, t: usize, rng: &mut R) -> Vec<f64> {
        let th = [Tangent::constant(theta[BETA]), Tangent::constant(theta[GAMMA])];
        let mut x = self.initial();
        (0..t)
            .map(|_| {
                let (eb, eg) = (standard_normal(rng), standard_normal(rng));
                x = self.sir_step(&x, &th, eb, eg);
                x.i.value.max(0.0) + self.obs_std * standard_normal(rng)
            })
            .collect()
    }
}
